"""Spatial algebra on SE(3) and its dual, in screw-theory form.

Conventions used everywhere in the package:

* A transform is a 4x4 homogeneous matrix. ``T_ab`` is the pose of frame
  ``b`` expressed in frame ``a`` (so ``p_a = T_ab @ p_b``).
* Motion vectors (twists, spatial accelerations, screw axes) and force
  vectors (wrenches, momenta) are 6-arrays ordered ``[linear; angular]``.
  The unit screw along x is ``[1,0,0,0,0,0]`` and about z is
  ``[0,0,0,0,0,1]``.
* Spatial inertia is the 6x6 matrix
  ``[[m I, -m[r]], [m[r], I_cm - m[r]^2]]`` about the frame origin.

The kernels are compiled with numba so that the propagation loops in
:mod:`articulated_suspension.model` stay fast; they take and return plain
float64 arrays.
"""

import numpy as np
from numba import njit

from .errors import ContractViolation

#: Orthonormality tolerance for rotation blocks.
ROTATION_TOL = 1e-10
#: Below this |q * angular| the exponential switches to its Taylor series.
SERIES_THRESHOLD = 1e-6


@njit(cache=True)
def mm(A, B):
    """Small dense product without the BLAS call overhead."""
    n, k = A.shape
    m = B.shape[1]
    C = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += A[i, t] * B[t, j]
            C[i, j] = acc
    return C


@njit(cache=True)
def mv(A, v):
    n, k = A.shape
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(k):
            acc += A[i, t] * v[t]
        out[i] = acc
    return out


@njit(cache=True)
def skew(v):
    """3x3 matrix ``[v]`` with ``[v] @ w == cross(v, w)``."""
    return np.array(
        [[0.0, -v[2], v[1]],
         [v[2], 0.0, -v[0]],
         [-v[1], v[0], 0.0]]
    )


@njit(cache=True)
def transform(R, p):
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = p
    return T


@njit(cache=True)
def translation(p):
    T = np.eye(4)
    T[:3, 3] = p
    return T


@njit(cache=True)
def inverse(T):
    Ti = np.eye(4)
    for i in range(3):
        acc = 0.0
        for j in range(3):
            Ti[i, j] = T[j, i]
            acc -= T[j, i] * T[j, 3]
        Ti[i, 3] = acc
    return Ti


@njit(cache=True)
def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


@njit(cache=True)
def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@njit(cache=True)
def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@njit(cache=True)
def exp6(s, q):
    """Pose reached by moving ``q`` along/about the unit screw ``s``.

    Rodrigues' closed form, with a Taylor fallback when the rotation angle
    is tiny so the ``(1 - cos)/theta^2`` style ratios never divide 0 by 0.
    """
    v = s[:3]
    w = s[3:]
    T = np.eye(4)
    wn = np.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    if wn == 0.0:
        T[:3, 3] = v * q
        return T
    W = skew(w)
    W2 = mm(W, W)
    th = q * wn
    if abs(th) < SERIES_THRESHOLD:
        a = q - q * q * q * wn * wn / 6.0  # sin(th)/wn
        b = q * q / 2.0 - q ** 4 * wn * wn / 24.0  # (1 - cos th)/wn^2
        c = q ** 3 / 6.0  # (th - sin th)/wn^3
    else:
        a = np.sin(th) / wn
        b = (1.0 - np.cos(th)) / (wn * wn)
        c = (th - np.sin(th)) / (wn * wn * wn)
    T[:3, :3] = np.eye(3) + a * W + b * W2
    T[:3, 3] = mv(q * np.eye(3) + b * W + c * W2, v)
    return T


@njit(cache=True)
def exp6_into(s, q, out):
    """Allocation-free :func:`exp6` writing into the 4x4 ``out``."""
    w0, w1, w2 = s[3], s[4], s[5]
    v0, v1, v2 = s[0], s[1], s[2]
    wn2 = w0 * w0 + w1 * w1 + w2 * w2
    out[3, 0] = 0.0
    out[3, 1] = 0.0
    out[3, 2] = 0.0
    out[3, 3] = 1.0
    if wn2 == 0.0:
        for i in range(3):
            for j in range(3):
                out[i, j] = 1.0 if i == j else 0.0
        out[0, 3] = v0 * q
        out[1, 3] = v1 * q
        out[2, 3] = v2 * q
        return
    wn = np.sqrt(wn2)
    th = q * wn
    if abs(th) < SERIES_THRESHOLD:
        a = q - q * q * q * wn2 / 6.0
        b = q * q / 2.0 - q ** 4 * wn2 / 24.0
        c = q ** 3 / 6.0
    else:
        sn = np.sin(th)
        a = sn / wn
        b = (1.0 - np.cos(th)) / wn2
        c = (th - sn) / (wn2 * wn)
    # R = I + a W + b (w w^T - |w|^2 I)
    d = 1.0 - b * wn2
    out[0, 0] = d + b * w0 * w0
    out[1, 1] = d + b * w1 * w1
    out[2, 2] = d + b * w2 * w2
    out[0, 1] = -a * w2 + b * w0 * w1
    out[1, 0] = a * w2 + b * w0 * w1
    out[0, 2] = a * w1 + b * w0 * w2
    out[2, 0] = -a * w1 + b * w0 * w2
    out[1, 2] = -a * w0 + b * w1 * w2
    out[2, 1] = a * w0 + b * w1 * w2
    # p = q v + b (w x v) + c (w (w.v) - |w|^2 v)
    wv = w0 * v0 + w1 * v1 + w2 * v2
    out[0, 3] = q * v0 + b * (w1 * v2 - w2 * v1) + c * (w0 * wv - wn2 * v0)
    out[1, 3] = q * v1 + b * (w2 * v0 - w0 * v2) + c * (w1 * wv - wn2 * v1)
    out[2, 3] = q * v2 + b * (w0 * v1 - w1 * v0) + c * (w2 * wv - wn2 * v2)


@njit(cache=True)
def compose_into(A, B, out):
    """``out = A @ B`` for rigid transforms; ``out`` must not alias A or B."""
    for i in range(3):
        for j in range(4):
            acc = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
            if j == 3:
                acc += A[i, 3]
            out[i, j] = acc
    out[3, 0] = 0.0
    out[3, 1] = 0.0
    out[3, 2] = 0.0
    out[3, 3] = 1.0


@njit(cache=True)
def adjoint_inv_apply_into(T, nu, out):
    """``out = adjoint(inverse(T)) @ nu``; ``out`` must not alias ``nu``."""
    v0 = nu[0] - (T[1, 3] * nu[5] - T[2, 3] * nu[4])
    v1 = nu[1] - (T[2, 3] * nu[3] - T[0, 3] * nu[5])
    v2 = nu[2] - (T[0, 3] * nu[4] - T[1, 3] * nu[3])
    for i in range(3):
        out[i] = T[0, i] * v0 + T[1, i] * v1 + T[2, i] * v2
        out[3 + i] = T[0, i] * nu[3] + T[1, i] * nu[4] + T[2, i] * nu[5]


@njit(cache=True)
def coadjoint_accumulate(T, F, out):
    """``out += coadjoint(T) @ F``."""
    f0 = T[0, 0] * F[0] + T[0, 1] * F[1] + T[0, 2] * F[2]
    f1 = T[1, 0] * F[0] + T[1, 1] * F[1] + T[1, 2] * F[2]
    f2 = T[2, 0] * F[0] + T[2, 1] * F[1] + T[2, 2] * F[2]
    px, py, pz = T[0, 3], T[1, 3], T[2, 3]
    out[0] += f0
    out[1] += f1
    out[2] += f2
    out[3] += T[0, 0] * F[3] + T[0, 1] * F[4] + T[0, 2] * F[5] + py * f2 - pz * f1
    out[4] += T[1, 0] * F[3] + T[1, 1] * F[4] + T[1, 2] * F[5] + pz * f0 - px * f2
    out[5] += T[2, 0] * F[3] + T[2, 1] * F[4] + T[2, 2] * F[5] + px * f1 - py * f0


@njit(cache=True)
def body_wrench_into(M, nu, nu_dot, out):
    """Allocation-free :func:`body_wrench`."""
    h = np.empty(6)
    for i in range(6):
        a = 0.0
        b = 0.0
        for j in range(6):
            a += M[i, j] * nu_dot[j]
            b += M[i, j] * nu[j]
        out[i] = a
        h[i] = b
    v0, v1, v2, w0, w1, w2 = nu[0], nu[1], nu[2], nu[3], nu[4], nu[5]
    out[0] += w1 * h[2] - w2 * h[1]
    out[1] += w2 * h[0] - w0 * h[2]
    out[2] += w0 * h[1] - w1 * h[0]
    out[3] += v1 * h[2] - v2 * h[1] + w1 * h[5] - w2 * h[4]
    out[4] += v2 * h[0] - v0 * h[2] + w2 * h[3] - w0 * h[5]
    out[5] += v0 * h[1] - v1 * h[0] + w0 * h[4] - w1 * h[3]


@njit(cache=True)
def adjoint(T):
    """6x6 map sending motion vectors from frame b to frame a (``T = T_ab``)."""
    R = np.ascontiguousarray(T[:3, :3])
    A = np.zeros((6, 6))
    A[:3, :3] = R
    A[3:, 3:] = R
    A[:3, 3:] = mm(skew(T[:3, 3]), R)
    return A


@njit(cache=True)
def coadjoint(T):
    """6x6 map sending force vectors from frame b to frame a (``T = T_ab``).

    Equal to ``adjoint(inverse(T)).T``.
    """
    R = np.ascontiguousarray(T[:3, :3])
    A = np.zeros((6, 6))
    A[:3, :3] = R
    A[3:, 3:] = R
    A[3:, :3] = mm(skew(T[:3, 3]), R)
    return A


@njit(cache=True)
def coadjoint_apply(T, F):
    """``coadjoint(T) @ F`` without forming the matrix."""
    out = np.empty(6)
    for i in range(3):
        out[i] = T[i, 0] * F[0] + T[i, 1] * F[1] + T[i, 2] * F[2]
        out[3 + i] = T[i, 0] * F[3] + T[i, 1] * F[4] + T[i, 2] * F[5]
    p = T[:3, 3]
    out[3:] += cross3(p, out[:3])
    return out


@njit(cache=True)
def cross3(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def adjoint_inv_apply(T, nu):
    """``adjoint(inverse(T)) @ nu`` without forming either matrix."""
    out = np.empty(6)
    v0 = nu[0] - (T[1, 3] * nu[5] - T[2, 3] * nu[4])
    v1 = nu[1] - (T[2, 3] * nu[3] - T[0, 3] * nu[5])
    v2 = nu[2] - (T[0, 3] * nu[4] - T[1, 3] * nu[3])
    for i in range(3):
        out[i] = T[0, i] * v0 + T[1, i] * v1 + T[2, i] * v2
        out[3 + i] = T[0, i] * nu[3] + T[1, i] * nu[4] + T[2, i] * nu[5]
    return out


@njit(cache=True)
def ad_matrix(nu):
    """Matrix of the Lie bracket: ``ad_matrix(nu) @ w == lie_bracket(nu, w)``."""
    A = np.zeros((6, 6))
    Wx = skew(nu[3:])
    A[:3, :3] = Wx
    A[3:, 3:] = Wx
    A[:3, 3:] = skew(nu[:3])
    return A


@njit(cache=True)
def lie_bracket(nu, w):
    v, om = nu[:3], nu[3:]
    out = np.empty(6)
    out[:3] = cross3(om, w[:3]) + cross3(v, w[3:])
    out[3:] = cross3(om, w[3:])
    return out


@njit(cache=True)
def dual_bracket(nu, F):
    """Force cross product ``-ad_nu^T F``.

    Satisfies ``<dual_bracket(nu, F), w> == -<F, lie_bracket(nu, w)>``.
    """
    v, om = nu[:3], nu[3:]
    out = np.empty(6)
    out[:3] = cross3(om, F[:3])
    out[3:] = cross3(v, F[:3]) + cross3(om, F[3:])
    return out


@njit(cache=True)
def build_inertia(m, r, I_cm):
    S = skew(r)
    M = np.zeros((6, 6))
    M[:3, :3] = m * np.eye(3)
    M[:3, 3:] = -m * S
    M[3:, :3] = m * S
    M[3:, 3:] = I_cm - m * mm(S, S)
    return M


@njit(cache=True)
def extract_inertia(M):
    """Return ``(m, r_cm, I_cm)`` from a spatial inertia matrix."""
    m = M[0, 0]
    r = np.array([M[5, 1], M[3, 2], M[4, 0]]) / m
    S = skew(r)
    I_cm = M[3:, 3:] + m * mm(S, S)
    return m, r, I_cm


@njit(cache=True)
def transform_inertia(M, T):
    """Re-express the inertia of a body attached to frame b in frame a.

    ``T`` is ``T_ab``. A point mass at the origin of b therefore ends up
    with its centre of mass at ``+T[:3, 3]`` in a.
    """
    m, r, I_cm = extract_inertia(M)
    R = np.ascontiguousarray(T[:3, :3])
    r_a = mv(R, r) + T[:3, 3]
    return build_inertia(m, r_a, mm(mm(R, I_cm), R.T))


@njit(cache=True)
def body_wrench(M, nu, nu_dot):
    """Euler-Poincare wrench of one rigid body in its own frame."""
    return mv(M, nu_dot) + dual_bracket(nu, mv(M, nu))


def pairing(F, nu):
    """Dual pairing (power) between a force and a motion vector."""
    return float(np.dot(F, nu))


def is_rotation(R, tol=ROTATION_TOL):
    R = np.asarray(R, dtype=float)
    return (
        R.shape == (3, 3)
        and np.allclose(R.T @ R, np.eye(3), atol=tol, rtol=0.0)
        and abs(np.linalg.det(R) - 1.0) < tol
    )


def is_transform(T, tol=ROTATION_TOL):
    T = np.asarray(T, dtype=float)
    return (
        T.shape == (4, 4)
        and is_rotation(T[:3, :3], tol)
        and np.allclose(T[3], [0.0, 0.0, 0.0, 1.0], atol=0.0, rtol=0.0)
    )


def is_unit_screw(s, tol=1e-12):
    s = np.asarray(s, dtype=float)
    wn = np.linalg.norm(s[3:])
    if wn > tol:
        return abs(wn - 1.0) < tol
    return abs(np.linalg.norm(s[:3]) - 1.0) < tol


def exp_screw(s, q):
    """Checked wrapper of :func:`exp6` for unit screws."""
    s = np.asarray(s, dtype=float)
    if s.shape != (6,) or not is_unit_screw(s):
        raise ContractViolation(f"screw {s} is not a unit screw")
    return exp6(s, float(q))


def make_inertia(m, r, I_cm):
    """Checked wrapper of :func:`build_inertia`; rejects non-positive mass."""
    if not m > 0:
        raise ContractViolation(f"mass must be positive, got {m}")
    I_cm = np.asarray(I_cm, dtype=float)
    if not np.allclose(I_cm, I_cm.T, atol=1e-12):
        raise ContractViolation("rotational inertia must be symmetric")
    return build_inertia(float(m), np.asarray(r, dtype=float), I_cm)
