import numpy as np
import pytest
from hypothesis import given, strategies as st

from articulated_suspension import model as mdl
from articulated_suspension import spatial as sp
from articulated_suspension.dynamics import (_aggregate, aggregate_inertia, com_sensitivity,
                                             inertia_in_world)
from articulated_suspension.model import Kinematics, chassis_frame, flat_ground_state
from articulated_suspension.validate import random_state

from conftest import central_tensor, random_rotation, random_transform
from oracles import cloud_moments, particles

seeds = st.integers(0, 2 ** 32 - 1)


def test_particles_reproduce_body():
    rng = np.random.default_rng(0)
    M = sp.make_inertia(3.0, rng.normal(size=3), 3.0 * central_tensor(rng))
    m, c, I = cloud_moments(*particles(M))
    assert m == pytest.approx(3.0) and np.allclose(c, sp.extract_inertia(M)[1])
    assert np.allclose(I, M[3:, 3:], rtol=1e-12, atol=1e-12)


@given(seeds)
def test_aggregate_matches_particle_cloud(model, seed):
    s = random_state(model, np.random.default_rng(seed))
    k = Kinematics(model, s, gravity=False)
    agg = aggregate_inertia(model, None, kin=k)
    Tinv = sp.inverse(agg.T_w_c)
    pts, ws = [], []
    for b in range(len(model.body_group)):
        p, w = particles(model.body_inertia[b])
        T = Tinv @ k.T_world[model.body_frame[b]]
        pts.append(p @ T[:3, :3].T + T[:3, 3])
        ws.append(w)
    m, c, I = cloud_moments(np.vstack(pts), np.concatenate(ws))
    assert agg.mass == pytest.approx(m, rel=1e-12)
    assert np.allclose(agg.com, c, rtol=1e-9, atol=1e-9 * np.abs(c).max())
    assert np.allclose(agg.M_c[3:, 3:], I, rtol=1e-9, atol=1e-9 * np.abs(I).max())


def test_single_body_at_frame():
    rng = np.random.default_rng(1)
    M = sp.make_inertia(5.0, [0.1, 0.2, 0.3], 5.0 * central_tensor(rng))
    T = random_transform(rng)
    out = _aggregate(T[None], T, np.array([0]), M[None], np.array([True]))
    assert np.allclose(out, M, atol=1e-12)


def test_two_point_masses():
    d, m = 0.7, 2.0
    M = sp.make_inertia(m, [0, 0, 0], np.zeros((3, 3)))
    T = np.array([sp.translation(np.array([d, 0, 0])), sp.translation(np.array([-d, 0, 0]))])
    out = _aggregate(T, np.eye(4), np.array([0, 1]), np.array([M, M]), np.array([True, True]))
    mass, com, I = sp.extract_inertia(out)
    assert mass == 2 * m and np.allclose(com, 0.0)
    assert np.allclose(np.diag(I), [0, 2 * m * d * d, 2 * m * d * d])


def test_sweep_invariants(model):
    m0 = model.total_mass
    prev = None
    for a in np.linspace(-0.2, 0.0, 41):
        agg = aggregate_inertia(model, flat_ground_state(model, [a, -0.2 - a]))
        M = agg.M_c
        assert abs(agg.mass - m0) <= 1e-12 * m0
        assert np.allclose(M, M.T, atol=1e-10 * np.abs(M).max())
        assert np.linalg.eigvalsh(M).min() > 0
        assert np.all(np.isfinite(agg.inertia))
        if prev is not None:
            assert np.abs(agg.com - prev).max() < 0.05
        prev = agg.com


def test_symmetric_state_centred(model):
    agg = aggregate_inertia(model, flat_ground_state(model, [-0.13, -0.13]))
    assert abs(agg.com[1]) < 1e-10
    assert np.array_equal(agg.T_c_cm[:3, :3], np.eye(3))
    assert np.allclose(agg.T_w_cm, agg.T_w_c @ agg.T_c_cm)


def test_world_inertia(model):
    M = aggregate_inertia(model, flat_ground_state(model, [-0.1, -0.1])).M_c
    assert np.allclose(inertia_in_world(M, np.eye(4)), M)
    rng = np.random.default_rng(2)
    T = np.eye(4)
    T[:3, :3] = random_rotation(rng)
    _, _, I_c = sp.extract_inertia(M)
    _, _, I_w = sp.extract_inertia(inertia_in_world(M, T))
    assert np.allclose(I_w, T[:3, :3] @ I_c @ T[:3, :3].T, rtol=1e-12, atol=1e-9)
    for _ in range(20):
        assert inertia_in_world(M, random_transform(rng))[0, 0] == pytest.approx(M[0, 0], rel=1e-12)


def test_sensitivity_mirror(model):
    J = com_sensitivity(model, flat_ground_state(model, [-0.1, -0.1]))
    assert J[1, 0] == pytest.approx(-J[1, 1], rel=1e-6)
    assert J[0, 0] == pytest.approx(J[0, 1], rel=1e-6)


def test_sensitivity_richardson(model):
    s = flat_ground_state(model, [-0.12, -0.07], q_arm=np.r_[0.3, 0.5, -0.5, 0.1, 0, 1.2, 0])
    J1 = com_sensitivity(model, s, h=1e-3)
    J2 = com_sensitivity(model, s, h=5e-4)
    rich = (4 * J2 - J1) / 3
    J = com_sensitivity(model, s)
    assert np.abs(J - rich).max() < 1e-4 * np.abs(rich).max()


def test_sensitivity_one_sided_at_boundary(model):
    lo, hi = model.chains["R"].stroke_limits()
    s = flat_ground_state(model, [hi - 5e-7, -0.1])
    assert np.all(np.isfinite(com_sensitivity(model, s)))


def test_sensitivity_zero_with_frozen_chain(model, monkeypatch):
    real = mdl.ch.chain_state
    monkeypatch.setattr(mdl.ch, "chain_state", lambda g, x, xd=0.0, xdd=0.0: real(g, -0.1))
    J = com_sensitivity(model, flat_ground_state(model, [-0.1, -0.1]))
    assert np.all(J == 0.0)


def test_chassis_frame_yaw_only(model):
    s = flat_ground_state(model, [-0.2, 0.0], chassis=mdl.ChassisMotion(yaw=0.4))
    T, _, _ = chassis_frame(Kinematics(model, s))
    assert np.allclose(T[:3, :3], sp.rot_z(0.4), atol=1e-12)
    assert T[2, 3] == pytest.approx(model.pivot_height, abs=1e-12)
