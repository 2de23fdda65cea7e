"""Closed four-joint suspension chain driven by a linear actuator.

Each side of the platform carries one chain. Three passive revolute joints
(at the bogie pivot B1, the cylinder pivot B3 and the rod eye Tc) and one
prismatic joint (the piston, B4) form a triangle with sides

* ``L_b``: B1 to B3, fixed on the base body,
* ``L_a``: B1 to Tc, fixed on the bogie,
* ``L_x = L_c0 + x + L_c``: B3 to Tc along the actuator.

The chain lies in the x-z plane of the base frame. Joint frames at B1 have
their z axis along base ``-y``; B3, B4 and Tc have theirs along base ``+y``.
With that choice the passive joint coordinates are the inner angles plus
constants::

    theta  = q  + alpha
    theta1 = q1 - alpha - pi
    theta2 = q2

where ``alpha`` is the direction of B1->B3 measured in the chain plane from
base +x towards base +z.
"""

from dataclasses import dataclass, field

import numpy as np

from numba import njit

from . import spatial as sp
from .errors import TriangleDegenerate

S_X = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
S_Z = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0])

#: Gap kept between the admissible stroke and a degenerate triangle (m).
STROKE_MARGIN = 1e-3


@dataclass(frozen=True)
class ChainGeometry:
    L_a: float
    L_b: float
    L_c0: float
    L_c: float
    alpha: float
    pivot: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not (self.L_a > 0 and self.L_b > 0):
            raise ValueError("L_a and L_b must be positive")
        if self.L_c0 < 0 or self.L_c < 0:
            raise ValueError("L_c0 and L_c must be non-negative")
        object.__setattr__(self, "pivot", np.asarray(self.pivot, dtype=float))

    @property
    def psi(self):
        return self.alpha

    @property
    def psi1(self):
        return -self.alpha - np.pi

    @property
    def psi2(self):
        return 0.0

    @property
    def offsets(self):
        return (self.psi, self.psi1, self.psi2)

    @property
    def cylinder_pivot(self):
        """Position of B3 in the base frame."""
        d = np.array([np.cos(self.alpha), 0.0, np.sin(self.alpha)])
        return self.pivot + self.L_b * d

    # Fixed poses of the joint frames before their joint displacement.
    @property
    def T_fb_B1(self):
        return sp.transform(sp.rot_x(np.pi / 2), self.pivot)

    @property
    def T_fb_B3(self):
        return sp.transform(sp.rot_x(-np.pi / 2), self.cylinder_pivot)

    @property
    def T_B3_B4(self):
        return sp.translation(np.array([self.L_c0, 0.0, 0.0]))

    @property
    def T_B4_Tc(self):
        return sp.translation(np.array([self.L_c, 0.0, 0.0]))

    @property
    def T_B1_Tc(self):
        """Rod-eye frame fixed on the bogie (branch through B1)."""
        return sp.transform(sp.rot_x(np.pi), np.array([self.L_a, 0.0, 0.0]))

    def length(self, x):
        return self.L_c0 + x + self.L_c

    def stroke_limits(self, margin=STROKE_MARGIN):
        """Actuator positions keeping the triangle strictly non-degenerate."""
        lo = abs(self.L_a - self.L_b) - self.L_c0 - self.L_c
        hi = self.L_a + self.L_b - self.L_c0 - self.L_c
        return lo + margin, hi - margin

    def mirrored(self):
        p = self.pivot.copy()
        p[1] = -p[1]
        return ChainGeometry(self.L_a, self.L_b, self.L_c0, self.L_c, self.alpha, p)


@dataclass(frozen=True)
class ChainState:
    x: float
    xd: float
    xdd: float
    q: tuple
    theta: tuple
    k: tuple
    kd: tuple

    @property
    def rates(self):
        """Joint rates ``(theta_dot, theta1_dot, x_dot, theta2_dot)``."""
        return (self.k[0] * self.xd, self.k[1] * self.xd, self.xd, self.k[2] * self.xd)

    @property
    def accels(self):
        """Joint accelerations in the same order as :attr:`rates`."""
        xd, xdd = self.xd, self.xdd
        return (
            self.kd[0] * xd + self.k[0] * xdd,
            self.kd[1] * xd + self.k[1] * xdd,
            xdd,
            self.kd[2] * xd + self.k[2] * xdd,
        )


def _cosines(geom, x):
    La, Lb = geom.L_a, geom.L_b
    Lx = geom.length(x)
    lo, hi = abs(La - Lb), La + Lb
    if not lo < Lx < hi:
        raise TriangleDegenerate(Lx, lo, hi)
    u = (Lx * Lx - Lb * Lb - La * La) / (-2.0 * Lb * La)
    u1 = (La * La - Lx * Lx - Lb * Lb) / (-2.0 * Lx * Lb)
    u2 = (Lb * Lb - Lx * Lx - La * La) / (-2.0 * Lx * La)
    return Lx, u, u1, u2


def inner_angles(geom, x):
    """Inner triangle angles ``(q, q1, q2)``, each in ``(-pi, 0)``."""
    _, u, u1, u2 = _cosines(geom, x)
    return -np.arccos(u), -np.arccos(u1), -np.arccos(u2)


def passive_angles(geom, q, q1, q2):
    return q + geom.psi, q1 + geom.psi1, q2 + geom.psi2


def rate_coefficients(geom, x, xd):
    """``(k1, k2, k3, k1_dot, k2_dot, k3_dot)`` with ``k_j = dq_j/dx``.

    From ``q = -arccos(u)``: ``dq/dx = u'/sqrt(1-u^2)`` and
    ``d2q/dx2 = (u'' (1-u^2) + u u'^2) / (1-u^2)^1.5``.
    """
    La, Lb = geom.L_a, geom.L_b
    Lx, u, u1, u2 = _cosines(geom, x)
    du = (-Lx / (La * Lb), 1.0 / (2 * Lb) - (Lb * Lb - La * La) / (2 * Lb * Lx * Lx),
          1.0 / (2 * La) - (La * La - Lb * Lb) / (2 * La * Lx * Lx))
    ddu = (-1.0 / (La * Lb), (Lb * Lb - La * La) / (Lb * Lx ** 3),
           (La * La - Lb * Lb) / (La * Lx ** 3))
    k, kd = [], []
    for uj, d1, d2 in zip((u, u1, u2), du, ddu):
        s2 = 1.0 - uj * uj
        s = np.sqrt(s2)
        k.append(d1 / s)
        kd.append((d2 * s2 + uj * d1 * d1) / (s2 * s) * xd)
    return (*k, *kd)


def chain_state(geom, x, xd=0.0, xdd=0.0):
    q = inner_angles(geom, x)
    coeffs = rate_coefficients(geom, x, xd)
    return ChainState(
        float(x), float(xd), float(xdd), q, passive_angles(geom, *q), coeffs[:3], coeffs[3:]
    )


def chain_poses(geom, cs):
    """Poses in the base frame: ``B1, B3, B4, Tc`` plus ``Tc`` via branch B."""
    th, th1, th2 = cs.theta
    B1 = geom.T_fb_B1 @ sp.exp6(S_Z, th)
    B3 = geom.T_fb_B3 @ sp.exp6(S_Z, th1)
    B4 = B3 @ geom.T_B3_B4 @ sp.exp6(S_X, cs.x)
    Tc_b = B4 @ geom.T_B4_Tc @ sp.exp6(S_Z, th2)
    return {"B1": B1, "B3": B3, "B4": B4, "Tc": B1 @ geom.T_B1_Tc, "Tc_branch_b": Tc_b}


def _local_poses(geom, cs):
    th, th1, th2 = cs.theta
    return (
        geom.T_fb_B1 @ sp.exp6(S_Z, th),
        geom.T_B1_Tc,
        geom.T_fb_B3 @ sp.exp6(S_Z, th1),
        geom.T_B3_B4 @ sp.exp6(S_X, cs.x),
        geom.T_B4_Tc @ sp.exp6(S_Z, th2),
    )


def chain_twists(geom, cs, nu_fb):
    """Body twists of the chain frames; ``Tc`` is returned for both branches."""
    nu_fb = np.asarray(nu_fb, dtype=float)
    dth, dth1, dx, dth2 = cs.rates
    B1, B1Tc, B3, B3B4, B4Tc = _local_poses(geom, cs)
    Ad = lambda T: sp.adjoint(sp.inverse(T))  # noqa: E731  parent->child
    nu_B1 = Ad(B1) @ nu_fb + S_Z * dth
    nu_Tc_a = Ad(B1Tc) @ nu_B1
    nu_B3 = Ad(B3) @ nu_fb + S_Z * dth1
    nu_B4 = Ad(B3B4) @ nu_B3 + S_X * dx
    nu_Tc_b = Ad(B4Tc) @ nu_B4 + S_Z * dth2
    return {"B1": nu_B1, "B3": nu_B3, "B4": nu_B4, "Tc": nu_Tc_a, "Tc_branch_b": nu_Tc_b}


def chain_accels(geom, cs, nu_fb, nu_fb_dot):
    """Spatial accelerations of the chain frames, both branches to ``Tc``.

    The bracket term at the prismatic joint uses the actuator rate, the same
    rule as every other joint.
    """
    nu = chain_twists(geom, cs, nu_fb)
    nu_fb_dot = np.asarray(nu_fb_dot, dtype=float)
    dth, dth1, dx, dth2 = cs.rates
    ath, ath1, ax, ath2 = cs.accels
    B1, B1Tc, B3, B3B4, B4Tc = _local_poses(geom, cs)
    Ad = lambda T: sp.adjoint(sp.inverse(T))  # noqa: E731
    a_B1 = Ad(B1) @ nu_fb_dot + S_Z * ath + sp.lie_bracket(nu["B1"], S_Z) * dth
    a_Tc_a = Ad(B1Tc) @ a_B1
    a_B3 = Ad(B3) @ nu_fb_dot + S_Z * ath1 + sp.lie_bracket(nu["B3"], S_Z) * dth1
    a_B4 = Ad(B3B4) @ a_B3 + S_X * ax + sp.lie_bracket(nu["B4"], S_X) * dx
    a_Tc_b = Ad(B4Tc) @ a_B4 + S_Z * ath2 + sp.lie_bracket(nu["Tc_branch_b"], S_Z) * dth2
    return {"B1": a_B1, "B3": a_B3, "B4": a_B4, "Tc": a_Tc_a, "Tc_branch_b": a_Tc_b}


@njit(cache=True)
def chain_kernel(L_a, L_b, L_c0, L_c, alpha, x, xd, xdd):
    """Compiled chain evaluation for the tree coordinates ``[th, th1, x, th2]``.

    Returns a 3x4 array of positions, rates and accelerations. The caller
    must keep ``x`` inside the stroke limits.
    """
    La, Lb = L_a, L_b
    Lx = L_c0 + x + L_c
    u = np.empty(3)
    du = np.empty(3)
    ddu = np.empty(3)
    u[0] = (Lx * Lx - Lb * Lb - La * La) / (-2.0 * Lb * La)
    u[1] = (La * La - Lx * Lx - Lb * Lb) / (-2.0 * Lx * Lb)
    u[2] = (Lb * Lb - Lx * Lx - La * La) / (-2.0 * Lx * La)
    du[0] = -Lx / (La * Lb)
    du[1] = 1.0 / (2 * Lb) - (Lb * Lb - La * La) / (2 * Lb * Lx * Lx)
    du[2] = 1.0 / (2 * La) - (La * La - Lb * Lb) / (2 * La * Lx * Lx)
    ddu[0] = -1.0 / (La * Lb)
    ddu[1] = (Lb * Lb - La * La) / (Lb * Lx ** 3)
    ddu[2] = (La * La - Lb * Lb) / (La * Lx ** 3)
    offs = (alpha, -alpha - np.pi, 0.0)
    slot = (0, 1, 3)
    out = np.empty((3, 4))
    out[0, 2] = x
    out[1, 2] = xd
    out[2, 2] = xdd
    for j in range(3):
        s2 = 1.0 - u[j] * u[j]
        s = np.sqrt(s2)
        k = du[j] / s
        kd = (ddu[j] * s2 + u[j] * du[j] * du[j]) / (s2 * s) * xd
        i = slot[j]
        out[0, i] = -np.arccos(u[j]) + offs[j]
        out[1, i] = k * xd
        out[2, i] = kd * xd + k * xdd
    return out
