import numpy as np
import pytest
from hypothesis import given, strategies as st

from articulated_suspension import chain as ch
from articulated_suspension import spatial as sp
from articulated_suspension.errors import TriangleDegenerate
from articulated_suspension.model import Kinematics, flat_ground_state

seeds = st.integers(0, 2 ** 32 - 1)


def geom(La=1.0, Lb=1.0, Lc0=0.5, Lc=0.0, alpha=0.0):
    return ch.ChainGeometry(La, Lb, Lc0, Lc, alpha)


def test_equilateral():
    q = ch.inner_angles(geom(), 0.5)
    assert np.allclose(q, -np.pi / 3, atol=1e-15)


def test_collinear_limit():
    g = geom()
    q, q1, q2 = ch.inner_angles(g, 1.5 - 1e-10)
    assert q == pytest.approx(-np.pi, abs=1e-4)
    assert -1e-4 < q1 < 0 and -1e-4 < q2 < 0


def test_degenerate_reports_bound():
    g = geom()
    with pytest.raises(TriangleDegenerate) as e:
        ch.inner_angles(g, 1.6)
    assert e.value.bound == 2.0
    with pytest.raises(TriangleDegenerate) as e:
        ch.inner_angles(g, -0.5)
    assert e.value.bound == 0.0


def test_law_of_sines_reconstruction():
    g = geom(0.8, 0.5, 0.4, 0.0)  # L_x = 0.9 at x = 0.5
    q, q1, q2 = ch.inner_angles(g, 0.5)
    assert q + q1 + q2 == pytest.approx(-np.pi, abs=1e-12)
    # each side over the sine of the opposite angle is the same
    k = 0.9 / np.sin(-q)
    assert 0.8 == pytest.approx(k * np.sin(-q1), abs=1e-12)
    assert 0.5 == pytest.approx(k * np.sin(-q2), abs=1e-12)


def test_passive_offsets():
    g = geom(alpha=np.pi / 6)
    assert g.psi == np.pi / 6 and g.psi1 == -np.pi / 6 - np.pi and g.psi2 == 0.0
    th = ch.passive_angles(g, -np.pi / 3, -np.pi / 3, -np.pi / 3)
    assert th[0] == pytest.approx(-np.pi / 6)
    assert ch.passive_angles(geom(), 0.1, 0.2, 0.3) == (0.1, 0.2 - np.pi, 0.3)


@given(st.floats(0.0, 1.0))
def test_closure_and_signs(model, u):
    for side in "RL":
        g = model.chains[side]
        lo, hi = g.stroke_limits()
        q = ch.inner_angles(g, lo + u * (hi - lo))
        assert abs(sum(q) + np.pi) < 1e-12
        assert all(-np.pi < a < 0 for a in q)


def test_stroke_limits_margin(model):
    g = model.chains["R"]
    lo, hi = g.stroke_limits()
    assert g.length(lo) == pytest.approx(abs(g.L_a - g.L_b) + 1e-3)
    assert g.length(hi) == pytest.approx(g.L_a + g.L_b - 1e-3)


@given(st.floats(0.02, 0.98))
def test_rate_coefficients(model, u):
    g = model.chains["R"]
    lo, hi = g.stroke_limits()
    x = lo + u * (hi - lo)
    k = np.array(ch.rate_coefficients(g, x, 0.0))
    assert abs(k[:3].sum()) < 1e-12
    assert np.all(k[3:] == 0.0)
    h = 1e-7
    fd = (np.array(ch.inner_angles(g, x + h)) - np.array(ch.inner_angles(g, x - h))) / (2 * h)
    assert np.all(np.abs(fd - k[:3]) < 1e-6 * np.abs(k[:3]).max())
    # kd = dk/dx * xd
    xd = 0.3
    kd = np.array(ch.rate_coefficients(g, x, xd)[3:])
    h = 1e-6
    dk = (np.array(ch.rate_coefficients(g, x + h, 0)[:3])
          - np.array(ch.rate_coefficients(g, x - h, 0)[:3])) / (2 * h)
    assert np.allclose(kd, dk * xd, rtol=1e-6, atol=1e-9)


def test_kernel_matches_reference(model):
    g = model.chains["L"]
    for x in np.linspace(*g.stroke_limits(), 7)[1:-1]:
        cs = ch.chain_state(g, x, 0.04, -0.3)
        K = ch.chain_kernel(g.L_a, g.L_b, g.L_c0, g.L_c, g.alpha, x, 0.04, -0.3)
        th, th1, th2 = cs.theta
        assert np.allclose(K[0], [th, th1, x, th2], atol=1e-13)
        assert np.allclose(K[1], cs.rates, atol=1e-13)
        assert np.allclose(K[2], cs.accels, atol=1e-12)


def test_mirror_symmetry(model):
    g = model.chains["R"]
    m = g.mirrored()
    assert np.allclose(m.pivot, model.chains["L"].pivot)
    for x in (-0.2, -0.1, 0.0):
        assert ch.inner_angles(g, x) == ch.inner_angles(m, x)


def test_assembly_closes(model):
    g = model.chains["R"]
    for x in (-0.2, -0.1, 0.0):
        P = ch.chain_poses(g, ch.chain_state(g, x))
        assert np.allclose(P["Tc"], P["Tc_branch_b"], atol=1e-10)
    # and the tree built from the config places the same frames
    s = flat_ground_state(model, [-0.1, -0.1])
    k = Kinematics(model, s)
    P = ch.chain_poses(g, ch.chain_state(g, -0.1))
    T_fb = k.pose("fb")
    for name, tree in (("B1", "B1_R"), ("B3", "B3_R"), ("B4", "B4_R"), ("Tc", "Tc_R")):
        assert np.allclose(T_fb @ P[name], k.pose(tree), atol=1e-10)


def test_twists_zero_and_consistent(model):
    g = model.chains["R"]
    cs = ch.chain_state(g, -0.1, 0.0)
    assert all(np.all(v == 0) for v in ch.chain_twists(g, cs, np.zeros(6)).values())
    cs = ch.chain_state(g, -0.1, 0.05)
    tw = ch.chain_twists(g, cs, np.zeros(6))
    assert np.abs(tw["Tc"] - tw["Tc_branch_b"]).max() < 1e-10


def test_rigid_base_motion(model):
    g = model.chains["R"]
    cs = ch.chain_state(g, -0.13, 0.0)
    nu_fb = np.random.default_rng(0).normal(size=6)
    tw = ch.chain_twists(g, cs, nu_fb)
    P = ch.chain_poses(g, cs)
    for name in ("B1", "B3", "B4", "Tc"):
        assert np.allclose(tw[name], sp.adjoint(sp.inverse(P[name])) @ nu_fb, atol=1e-12)


@given(seeds)
def test_branch_agreement(model, seed):
    rng = np.random.default_rng(seed)
    g = model.chains["L"]
    cs = ch.chain_state(g, rng.uniform(-0.25, 0.05), rng.uniform(-0.2, 0.2), rng.uniform(-1, 1))
    nu, nud = rng.normal(size=(2, 6))
    tw = ch.chain_twists(g, cs, nu)
    ac = ch.chain_accels(g, cs, nu, nud)
    assert np.abs(tw["Tc"] - tw["Tc_branch_b"]).max() < 1e-10
    assert np.abs(ac["Tc"] - ac["Tc_branch_b"]).max() < 1e-8


def test_named_acceleration_case(model):
    g = model.chains["R"]
    cs = ch.chain_state(g, -0.1, 0.05, 0.2)
    ac = ch.chain_accels(g, cs, np.zeros(6), np.zeros(6))
    assert np.abs(ac["Tc"] - ac["Tc_branch_b"]).max() < 1e-8


def test_gravity_only_accels(model):
    g = model.chains["R"]
    cs = ch.chain_state(g, -0.1)
    grav = np.array([0, 0, 9.81, 0, 0, 0])
    ac = ch.chain_accels(g, cs, np.zeros(6), grav)
    P = ch.chain_poses(g, cs)
    for name in ("B1", "B3", "B4", "Tc"):
        assert np.allclose(ac[name], sp.adjoint(sp.inverse(P[name])) @ grav, atol=1e-12)


@given(seeds)
def test_accels_are_twist_derivatives(model, seed):
    rng = np.random.default_rng(seed)
    g = model.chains["R"]
    x0, xd, xdd = rng.uniform(-0.2, 0.0), rng.uniform(-0.1, 0.1), rng.uniform(-1, 1)
    nu, nud = rng.normal(size=(2, 6))

    def at(t):
        cs = ch.chain_state(g, x0 + xd * t + 0.5 * xdd * t * t, xd + xdd * t, xdd)
        return cs, nu + t * nud

    h = 1e-5
    cs, n0 = at(0.0)
    ac = ch.chain_accels(g, cs, n0, nud)
    tp = ch.chain_twists(g, *at(h))
    tm = ch.chain_twists(g, *at(-h))
    for name in ("B1", "B3", "B4", "Tc", "Tc_branch_b"):
        d = (tp[name] - tm[name]) / (2 * h)
        assert np.linalg.norm(d - ac[name]) < 1e-4 * max(1.0, np.linalg.norm(ac[name]))
