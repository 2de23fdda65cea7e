"""Compiled end-to-end evaluation of the normal forces.

:func:`articulated_suspension.forces.force_inputs` builds its result from
readable pieces and is the reference. This module does the same work in
one numba call: it places the base on flat ground, propagates the tree,
computes the manipulator wrench and the aggregate inertia, and solves the
normal-force balance. The simulator and the optimizer use it because their
inner loops evaluate forces many thousands of times.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import spatial as sp
from .chain import chain_kernel
from .dynamics import _aggregate
from .errors import CenterOfMassOutsideWheelbase, TriangleDegenerate
from .model import (WHEELS, _backward_pass, _body_wrenches, _chassis_kernel, _placement,
                    _project_wrenches, _propagate, ChassisMotion)


@njit(cache=True)
def _coordinates(geo, chain_base, d, height, n_coords, arm0, wheel0,
                 x, xd, xdd, q_arm, qd_arm, qdd_arm, q_w, qd_w, qdd_w, chassis):
    q = np.zeros(n_coords)
    qd = np.zeros(n_coords)
    qdd = np.zeros(n_coords)
    p = 0.0
    dp = 0.0
    ddp = 0.0
    for j in range(2):
        C = chain_kernel(geo[j, 0], geo[j, 1], geo[j, 2], geo[j, 3], geo[j, 4],
                         x[j], xd[j], xdd[j])
        b = chain_base[j]
        q[b:b + 4] = C[0]
        qd[b:b + 4] = C[1]
        qdd[b:b + 4] = C[2]
        p += 0.5 * C[0, 0]
        dp += 0.5 * C[1, 0]
        ddp += 0.5 * C[2, 0]
    q[:6], qd[:6], qdd[:6] = _placement(d, height, p, dp, ddp, chassis)
    na = q_arm.shape[0]
    q[arm0:arm0 + na] = q_arm
    qd[arm0:arm0 + na] = qd_arm
    qdd[arm0:arm0 + na] = qdd_arm
    q[wheel0:wheel0 + 4] = q_w
    qd[wheel0:wheel0 + 4] = qd_w
    qdd[wheel0:wheel0 + 4] = qdd_w
    return q, qd, qdd


@njit(cache=True)
def _solve_normal(A, b):
    At = np.ascontiguousarray(A.T)
    f = sp.mv(At, np.linalg.solve(sp.mm(A, At), b))
    return f, np.max(np.abs(sp.mv(A, f) - b))


@njit(cache=True)
def _forces(parent, kind, screw, offset, coord, body_frame, inertia, man_mask, plat_mask,
            m_idx, fb_idx, wheel_idx, r_mid, root_acc, q, qd, qdd, M_frozen, frozen):
    T_world, T_local, nu, acc = _propagate(parent, kind, screw, offset, coord, q, qd, qdd,
                                           root_acc)
    F = _body_wrenches(body_frame, inertia, nu, acc)
    F_m = _project_wrenches(T_world, m_idx, body_frame, F, man_mask)

    T_fb = T_world[fb_idx]
    a_fb = acc[fb_idx].copy()
    a_fb[:3] -= sp.mv(np.ascontiguousarray(T_fb[:3, :3].T), root_acc[:3])
    T_wc, nu_c, nu_c_dot = _chassis_kernel(T_fb, nu[fb_idx], a_fb, r_mid, root_acc)

    ones = np.ones(body_frame.shape[0], dtype=np.bool_)
    M_all = _aggregate(T_world, T_wc, body_frame, inertia, ones)
    # frozen: platform inertia held at a reference configuration (comparison only)
    M_plat = M_frozen if frozen else _aggregate(T_world, T_wc, body_frame, inertia, plat_mask)
    mass, com, I_c = sp.extract_inertia(M_all)
    T_c_cm = sp.translation(com)
    T_w_cm = sp.mm(T_wc, T_c_cm)
    T_cm_w = sp.inverse(T_w_cm)
    nu_cm = sp.adjoint_inv_apply(T_c_cm, nu_c)
    nu_cm_dot = sp.adjoint_inv_apply(T_c_cm, nu_c_dot)
    M_p = sp.transform_inertia(M_plat, sp.inverse(T_c_cm))
    W = sp.body_wrench(M_p, nu_cm, nu_cm_dot) + sp.coadjoint_apply(sp.mm(T_cm_w, T_world[m_idx]), F_m)

    contacts = np.empty((4, 3))
    R = np.ascontiguousarray(T_cm_w[:3, :3])
    for i in range(4):
        pw = T_world[wheel_idx[i], :3, 3].copy()
        pw[2] = 0.0
        contacts[i] = sp.mv(R, pw) + T_cm_w[:3, 3]
    h = -np.mean(contacts[:, 2])
    A = np.empty((3, 4))
    A[0] = 1.0
    A[1] = contacts[:, 1]
    A[2] = -contacts[:, 0]
    b = np.array([W[2], W[3] - h * W[1], W[4] + h * W[0]])
    f, res = _solve_normal(A, b)
    return f, res, com, contacts, W, F_m


@njit(cache=True)
def _forces_at(geo, chain_base, d, height, n_coords, arm0, wheel0,
               x, xd, xdd, q_arm, qd_arm, qdd_arm, q_w, qd_w, qdd_w, chassis,
               parent, kind, screw, offset, coord, body_frame, inertia, man_mask, plat_mask,
               m_idx, fb_idx, wheel_idx, r_mid, root_acc, M_frozen, frozen):
    """:func:`_coordinates` followed by :func:`_forces` in one call."""
    q, qd, qdd = _coordinates(geo, chain_base, d, height, n_coords, arm0, wheel0,
                              x, xd, xdd, q_arm, qd_arm, qdd_arm, q_w, qd_w, qdd_w, chassis)
    return _forces(parent, kind, screw, offset, coord, body_frame, inertia, man_mask,
                   plat_mask, m_idx, fb_idx, wheel_idx, r_mid, root_acc, q, qd, qdd,
                   M_frozen, frozen)


@njit(cache=True)
def _virtual_work(body_frame, inertia, F, nus):
    """Generalised inertia ``H`` and force ``tau`` along the partial twists ``nus``."""
    k = nus.shape[0]
    H = np.zeros((k, k))
    tau = np.zeros(k)
    for b in range(body_frame.shape[0]):
        f = body_frame[b]
        for i in range(k):
            tau[i] += np.sum(F[b] * nus[i, f])
            Mv = sp.mv(inertia[b], nus[i, f])
            for j in range(k):
                H[i, j] += np.sum(Mv * nus[j, f])
    return H, tau


@dataclass(frozen=True)
class ForceResult:
    """Output of one pipeline evaluation; forces are ``[FR, FL, RR, RL]``."""

    forces: np.ndarray
    residual: float
    com: np.ndarray
    contacts: np.ndarray
    wrench: np.ndarray
    F_m: np.ndarray

    @property
    def l1(self):
        return -0.5 * float(self.contacts[2, 0] + self.contacts[3, 0])

    @property
    def l2(self):
        return 0.5 * float(self.contacts[0, 0] + self.contacts[1, 0])


class ForcePipeline:
    """Normal forces as a function of suspension and command inputs.

    Holds the model arrays in the layout the compiled kernels expect.
    """

    def __init__(self, model):
        self.model = model
        m = model
        self.geo = np.array([[g.L_a, g.L_b, g.L_c0, g.L_c, g.alpha]
                             for g in (m.chains["R"], m.chains["L"])])
        self.chain_base = np.array([m.chain_coords("R")[0], m.chain_coords("L")[0]],
                                   dtype=np.int64)
        self.r_mid = 0.5 * (m.chains["R"].pivot + m.chains["L"].pivot)
        self.d = -self.r_mid
        self.height = m.pivot_height
        self.arm0 = 6
        self.wheel0 = 6 + m.n_arm
        self.wheel_idx = np.array([m.frame("w" + w) for w in WHEELS], dtype=np.int64)
        self.root_acc = np.array([0.0, 0.0, m.gravity, 0.0, 0.0, 0.0])
        self.man_mask = np.asarray(m.manipulator_mask)
        self.plat_mask = np.asarray(m.platform_mask)
        lims = np.array([m.chains[s].stroke_limits() for s in ("R", "L")])
        self.x_lo, self.x_hi = lims[:, 0], lims[:, 1]
        self._zero_arm = np.zeros(m.n_arm)
        self._zero_w = np.zeros(4)
        self._no_freeze = np.zeros((6, 6))
        self._layout = (self.geo, self.chain_base, self.d, self.height, m.n_coords,
                        self.arm0, self.wheel0)
        self._static = (m.parent, m.kind, m.screw, m.offset, m.coord, m.body_frame,
                        m.body_inertia, self.man_mask, self.plat_mask, m.frame("m"),
                        m.frame("fb"), self.wheel_idx, self.r_mid, self.root_acc)

    def pack(self, q_arm, qd_arm=None, qdd_arm=None, q_w=None, qd_w=None, qdd_w=None,
             chassis=None):
        """Commands as the tuple of float arrays the kernels take."""
        za, zw = self._zero_arm, self._zero_w
        ch = chassis.as_array() if isinstance(chassis, ChassisMotion) else (
            np.zeros(7) if chassis is None else np.asarray(chassis, dtype=float))
        f = lambda v, z: z if v is None else np.asarray(v, dtype=float)  # noqa: E731
        return (f(q_arm, za), f(qd_arm, za), f(qdd_arm, za), f(q_w, zw), f(qd_w, zw),
                f(qdd_w, zw), ch)

    def check_stroke(self, x):
        bad = (x <= self.x_lo) | (x >= self.x_hi)
        if bad.any():
            j = int(np.argmax(bad))
            g = self.geo[j]
            L = g[2] + x[j] + g[3]
            raise TriangleDegenerate(L, abs(g[0] - g[1]), g[0] + g[1])

    def coordinates_packed(self, x, xd, xdd, packed):
        x = np.asarray(x, dtype=float)
        self.check_stroke(x)
        return _coordinates(self.geo, self.chain_base, self.d, self.height,
                            self.model.n_coords, self.arm0, self.wheel0, x,
                            np.asarray(xd, float), np.asarray(xdd, float), *packed)

    def coordinates(self, x, xd, xdd, q_arm, qd_arm=None, qdd_arm=None,
                    q_w=None, qd_w=None, qdd_w=None, chassis=None):
        """Full tree coordinate vectors ``(q, qd, qdd)``."""
        return self.coordinates_packed(
            x, xd, xdd, self.pack(q_arm, qd_arm, qdd_arm, q_w, qd_w, qdd_w, chassis))

    def evaluate_packed(self, x, xd, xdd, packed):
        """Raw kernel output ``(forces, residual, com, contacts, wrench, F_m)``.

        ``x``, ``xd`` and ``xdd`` must be float arrays of length 2.
        """
        lo, hi = self.x_lo, self.x_hi
        if not (lo[0] < x[0] < hi[0] and lo[1] < x[1] < hi[1]):
            self.check_stroke(np.asarray(x, dtype=float))
        return _forces_at(*self._layout, x, xd, xdd, *packed, *self._static,
                          self._no_freeze, False)

    def evaluate_coordinates(self, q, qd, qdd, M_frozen=None):
        if M_frozen is None:
            return _forces(*self._static, q, qd, qdd, self._no_freeze, False)
        return _forces(*self._static, q, qd, qdd, np.asarray(M_frozen, dtype=float), True)

    def platform_inertia(self, x, q_arm=None, q_w=None, chassis=None):
        """Spatial inertia of the platform (everything but the arm) in the chassis frame."""
        m = self.model
        q, qd, qdd = self.coordinates(x, np.zeros(2), np.zeros(2),
                                      self._zero_arm if q_arm is None else q_arm,
                                      q_w=q_w, chassis=chassis)
        T_world, _, nu, acc = _propagate(m.parent, m.kind, m.screw, m.offset, m.coord,
                                         q, qd, qdd, self.root_acc)
        T_wc, _, _ = _chassis_kernel(T_world[m.frame("fb")], nu[m.frame("fb")], np.zeros(6),
                                     self.r_mid, np.zeros(6))
        return _aggregate(T_world, T_wc, m.body_frame, m.body_inertia, self.plat_mask)

    def frozen(self, x, xd, xdd, M_frozen, q_arm, qd_arm=None, qdd_arm=None,
               q_w=None, qd_w=None, qdd_w=None, chassis=None):
        """Forces with the platform inertia replaced by ``M_frozen``.

        Kinematics, contact geometry and the arm wrench still follow the
        actual state; only the inertia the platform carries is held, as a
        single-rigid-body model of the vehicle would hold it.
        """
        q, qd, qdd = self.coordinates(x, xd, xdd, q_arm, qd_arm, qdd_arm,
                                      q_w, qd_w, qdd_w, chassis)
        return ForceResult(*self.evaluate_coordinates(q, qd, qdd, M_frozen))

    def __call__(self, x, xd, xdd, q_arm, qd_arm=None, qdd_arm=None,
                 q_w=None, qd_w=None, qdd_w=None, chassis=None, check_wheelbase=True):
        q, qd, qdd = self.coordinates(x, xd, xdd, q_arm, qd_arm, qdd_arm,
                                      q_w, qd_w, qdd_w, chassis)
        out = ForceResult(*self.evaluate_coordinates(q, qd, qdd))
        if check_wheelbase and not (out.l1 > 0 and out.l2 > 0):
            raise CenterOfMassOutsideWheelbase(f"l1={out.l1:.4g}, l2={out.l2:.4g}")
        return out

    def joint_forces(self, q, qd, qdd):
        """Generalised forces of every tree coordinate (inverse dynamics)."""
        m = self.model
        T_world, T_local, nu, acc = _propagate(m.parent, m.kind, m.screw, m.offset, m.coord,
                                               q, qd, qdd, self.root_acc)
        F = _body_wrenches(m.body_frame, m.body_inertia, nu, acc)
        return _backward_pass(m.parent, m.kind, m.screw, m.coord, T_local, m.body_frame, F,
                              m.n_coords)

    def actuator_dynamics(self, x, xd, q_arm, qd_arm=None, qdd_arm=None,
                          q_w=None, qd_w=None, qdd_w=None, chassis=None):
        """Mass matrix ``H`` (2x2) and bias ``tau`` (2) along the actuators.

        Obtained by virtual power with the partial twists of a unit actuator
        rate: the actuator forces needed for accelerations ``xdd`` are
        ``H @ xdd + tau``. ``tau`` contains gravity and all velocity and
        command-acceleration effects.
        """
        m = self.model
        q, qd, qdd = self.coordinates(x, xd, np.zeros(2), q_arm, qd_arm, qdd_arm,
                                      q_w, qd_w, qdd_w, chassis)
        T_world, _, nu, acc = _propagate(m.parent, m.kind, m.screw, m.offset, m.coord,
                                         q, qd, qdd, self.root_acc)
        F = _body_wrenches(m.body_frame, m.body_inertia, nu, acc)
        ch = np.zeros(7)
        if chassis is not None:
            c = chassis.as_array() if isinstance(chassis, ChassisMotion) else np.asarray(chassis)
            ch[:3] = c[:3]
        nus = np.empty((2,) + nu.shape)
        zero = np.zeros(m.n_coords)
        for j in range(2):
            e = np.zeros(2)
            e[j] = 1.0
            qj, qdj, _ = self.coordinates(x, e, np.zeros(2), q_arm, q_w=q_w, chassis=ch)
            _, _, nus[j], _ = _propagate(m.parent, m.kind, m.screw, m.offset, m.coord,
                                         qj, qdj, zero, np.zeros(6))
        return _virtual_work(m.body_frame, m.body_inertia, F, nus)
