import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from articulated_suspension import spatial as sp
from articulated_suspension.errors import ContractViolation

from conftest import central_tensor, random_spd, random_transform

SZ = np.array([0.0, 0, 0, 0, 0, 1])
SX = np.array([1.0, 0, 0, 0, 0, 0])
SY = np.array([0.0, 1, 0, 0, 0, 0])

seeds = st.integers(0, 2 ** 32 - 1)


def hat(s):
    """4x4 matrix of a twist, the oracle for exponentials and brackets."""
    H = np.zeros((4, 4))
    H[:3, :3] = sp.skew(s[3:])
    H[:3, 3] = s[:3]
    return H


def vee(H):
    return np.array([H[0, 3], H[1, 3], H[2, 3], H[2, 1], H[0, 2], H[1, 0]])


def unit_screw(rng):
    if rng.random() < 0.3:
        v = rng.normal(size=3)
        return np.concatenate([v / np.linalg.norm(v), np.zeros(3)])
    w = rng.normal(size=3)
    w /= np.linalg.norm(w)
    return np.concatenate([np.cross(rng.normal(size=3), w) + rng.normal() * w, w])


def test_exp_identity_and_quarter_turn():
    assert np.array_equal(sp.exp_screw(SZ, 0.0), np.eye(4))
    T = sp.exp_screw(SZ, np.pi / 2)
    assert np.allclose(T[:3, :3], [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)
    assert np.allclose(T[:3, 3], 0.0, atol=1e-15)


def test_exp_prismatic():
    T = sp.exp_screw(SX, 0.25)
    assert np.array_equal(T[:3, :3], np.eye(3))
    assert np.allclose(T[:3, 3], [0.25, 0, 0], atol=0, rtol=0)


def test_exp_rejects_non_unit():
    with pytest.raises(ContractViolation):
        sp.exp_screw(np.array([0, 0, 0, 0, 0, 2.0]), 0.1)


@given(seeds, st.floats(-np.pi, np.pi))
def test_exp_matches_matrix_exponential(seed, q):
    s = unit_screw(np.random.default_rng(seed))
    assert np.allclose(sp.exp_screw(s, q), expm(hat(s) * q), atol=1e-12)


def test_exp_series_branch_continuous():
    s = unit_screw(np.random.default_rng(3))
    for q in (1e-9, 5e-7, 2e-6):
        assert np.allclose(sp.exp_screw(s, q), expm(hat(s) * q), atol=1e-15)


@given(seeds, st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi))
def test_exp_group_property(seed, a, b):
    s = unit_screw(np.random.default_rng(seed))
    assert np.allclose(sp.exp_screw(s, a) @ sp.exp_screw(s, b), sp.exp_screw(s, a + b),
                       atol=1e-10)


@given(seeds)
def test_transform_inverse(seed):
    T = random_transform(np.random.default_rng(seed))
    assert sp.is_transform(T)
    assert np.allclose(T @ sp.inverse(T), np.eye(4), atol=1e-12)


def test_adjoint_identity_and_rotation():
    assert np.array_equal(sp.adjoint(np.eye(4)), np.eye(6))
    T = random_transform(np.random.default_rng(1))
    T[:3, 3] = 0.0
    A = sp.adjoint(T)
    assert np.allclose(A[:3, :3], T[:3, :3]) and np.allclose(A[3:, 3:], T[:3, :3])
    assert np.all(A[:3, 3:] == 0) and np.all(A[3:, :3] == 0)


@given(seeds)
def test_adjoint_is_conjugation(seed):
    # Ad_T s = vee(T hat(s) T^-1)
    rng = np.random.default_rng(seed)
    T, s = random_transform(rng), rng.normal(size=6)
    assert np.allclose(sp.adjoint(T) @ s, vee(T @ hat(s) @ sp.inverse(T)), atol=1e-12)


@given(seeds)
def test_adjoint_homomorphism(seed):
    rng = np.random.default_rng(seed)
    A, B = random_transform(rng), random_transform(rng)
    assert np.allclose(sp.adjoint(A @ B), sp.adjoint(A) @ sp.adjoint(B), atol=1e-10)
    assert np.allclose(sp.adjoint(A) @ sp.adjoint(sp.inverse(A)), np.eye(6), atol=1e-12)


@given(seeds)
def test_coadjoint_duality(seed):
    rng = np.random.default_rng(seed)
    T, F, nu = random_transform(rng), rng.normal(size=6), rng.normal(size=6)
    C = sp.coadjoint(T)
    assert np.allclose(C, sp.adjoint(sp.inverse(T)).T, atol=1e-12)
    assert abs(sp.pairing(C @ F, nu) - sp.pairing(F, sp.adjoint(sp.inverse(T)) @ nu)) < 1e-12 * (
        1 + np.abs(F).sum() * np.abs(nu).sum() * 10)
    assert np.allclose(sp.coadjoint_apply(T, F), C @ F, atol=1e-12)
    assert np.allclose(sp.adjoint_inv_apply(T, nu), sp.adjoint(sp.inverse(T)) @ nu, atol=1e-12)


def test_coadjoint_rotation_keeps_pure_force():
    T = random_transform(np.random.default_rng(2))
    T[:3, 3] = 0.0
    F = np.array([1.0, 2.0, 3.0, 0, 0, 0])
    out = sp.coadjoint(T) @ F
    assert np.allclose(out[:3], T[:3, :3] @ F[:3]) and np.allclose(out[3:], 0.0)
    assert np.array_equal(sp.coadjoint(np.eye(4)), np.eye(6))


def test_bracket_of_rotation_and_translation():
    # matrix commutator oracle
    expected = vee(hat(SZ) @ hat(SX) - hat(SX) @ hat(SZ))
    assert np.allclose(sp.lie_bracket(SZ, SX), expected)
    assert np.allclose(sp.lie_bracket(SZ, SX), SY)


@given(seeds)
def test_bracket_properties(seed):
    rng = np.random.default_rng(seed)
    nu, w, F = rng.normal(size=(3, 6))
    assert np.allclose(sp.lie_bracket(nu, nu), 0.0, atol=1e-15)
    assert np.allclose(sp.lie_bracket(nu, w), vee(hat(nu) @ hat(w) - hat(w) @ hat(nu)),
                       atol=1e-12)
    assert np.allclose(sp.ad_matrix(nu) @ w, sp.lie_bracket(nu, w), atol=1e-14)
    lhs = sp.pairing(sp.dual_bracket(nu, F), w)
    rhs = -sp.pairing(F, sp.lie_bracket(nu, w))
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


def test_build_inertia_zero_offset():
    M = sp.make_inertia(2.0, [0, 0, 0], np.diag([1.0, 2.0, 3.0]))
    assert np.array_equal(M, np.diag([2.0, 2.0, 2.0, 1.0, 2.0, 3.0]))


def test_make_inertia_rejects_bad_mass():
    with pytest.raises(ContractViolation):
        sp.make_inertia(0.0, [0, 0, 0], np.eye(3))


@given(seeds)
def test_inertia_round_trip(seed):
    rng = np.random.default_rng(seed)
    r = np.array([0.3, 0.0, 0.1]) + rng.normal(size=3) * 0.1
    I = random_spd(rng)
    m, r2, I2 = sp.extract_inertia(sp.make_inertia(850.0, r, I))
    assert m == 850.0
    assert np.allclose(r2, r, atol=1e-12, rtol=0)
    assert np.allclose(I2, I, atol=1e-12 * 850, rtol=1e-12)
    M = sp.make_inertia(850.0, r, I)
    assert np.allclose(M, M.T, atol=1e-10)
    assert np.linalg.eigvalsh(M).min() > 0


def test_transform_inertia_identity():
    M = sp.make_inertia(3.0, [0.1, 0.2, 0.3], random_spd(np.random.default_rng(4)))
    assert np.allclose(sp.transform_inertia(M, np.eye(4)), M, atol=1e-14)


def test_point_mass_moves_with_translation():
    # convention: T = T_ab, a point mass at the origin of b sits at +d in a
    d = np.array([0.4, -0.2, 1.5])
    M = sp.make_inertia(2.0, np.zeros(3), np.zeros((3, 3)))
    m, r, I = sp.extract_inertia(sp.transform_inertia(M, sp.translation(d)))
    assert m == 2.0 and np.allclose(r, d)
    # 4x4 homogeneous oracle: the point's coordinates in a
    p = sp.translation(d) @ np.array([0, 0, 0, 1.0])
    assert np.allclose(r, p[:3])


@given(seeds)
def test_transform_inertia_is_congruence(seed):
    rng = np.random.default_rng(seed)
    m = rng.uniform(0.5, 100)
    M = sp.make_inertia(m, rng.normal(size=3), m * central_tensor(rng))
    T = random_transform(rng)
    X = sp.adjoint(sp.inverse(T))
    out = sp.transform_inertia(M, T)
    assert np.allclose(out, X.T @ M @ X, atol=1e-9 * np.abs(M).max())
    assert out[0, 0] == pytest.approx(m, rel=1e-12)
    assert np.allclose(out, out.T, atol=1e-10 * np.abs(out).max())
    assert np.linalg.eigvalsh(out).min() > -1e-9 * np.abs(out).max()


def test_body_wrench_gyroscopic():
    # Euler's equations: moment = I w_dot + w x (I w)
    I = np.diag([1.0, 2.0, 3.0])
    M = sp.make_inertia(5.0, np.zeros(3), I)
    w = np.array([0.3, -1.2, 0.7])
    nu = np.concatenate([np.zeros(3), w])
    F = sp.body_wrench(M, nu, np.zeros(6))
    assert np.allclose(F[3:], np.cross(w, I @ w))
    assert np.allclose(F[:3], 0.0)


def test_body_wrench_static_weight():
    r = np.array([0.2, 0.0, 0.5])
    M = sp.make_inertia(10.0, r, np.eye(3))
    g = np.array([0, 0, 9.81, 0, 0, 0])  # fictitious upward root acceleration
    F = sp.body_wrench(M, np.zeros(6), g)
    assert np.allclose(F[:3], 10.0 * g[:3])
    assert np.allclose(F[3:], np.cross(r, 10.0 * g[:3]))
    assert np.array_equal(sp.body_wrench(M, np.zeros(6), np.zeros(6)), np.zeros(6))
