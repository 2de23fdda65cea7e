"""Configuration-dependent inertial parameters of the whole machine."""

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import spatial as sp
from .model import Kinematics, chassis_frame, flat_ground_state

#: Step (m) of the central difference in :func:`com_sensitivity`.
SENSITIVITY_STEP = 1e-6


@njit(cache=True)
def _aggregate(T_world, T_target, body_frame, inertia, mask):
    """Sum of the selected body inertias about and in frame ``T_target``.

    Each body is moved by its mass, CoM and central tensor (``R I R^T``
    plus the parallel-axis term), which avoids forming 6x6 products.
    """
    Tinv = sp.inverse(T_target)
    T = np.empty((4, 4))
    mass = 0.0
    first = np.zeros(3)
    I_o = np.zeros((3, 3))
    for b in range(body_frame.shape[0]):
        if not mask[b]:
            continue
        Mb = inertia[b]
        m = Mb[0, 0]
        r0, r1, r2 = Mb[5, 1] / m, Mb[3, 2] / m, Mb[4, 0] / m
        # central tensor: I_cm = M_rr + m [r]^2
        rr = r0 * r0 + r1 * r1 + r2 * r2
        r = (r0, r1, r2)
        Ic = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                Ic[i, j] = Mb[3 + i, 3 + j] + m * (r[i] * r[j] - (rr if i == j else 0.0))
        sp.compose_into(Tinv, T_world[body_frame[b]], T)
        c = np.empty(3)
        for i in range(3):
            c[i] = T[i, 0] * r0 + T[i, 1] * r1 + T[i, 2] * r2 + T[i, 3]
        cc = c[0] * c[0] + c[1] * c[1] + c[2] * c[2]
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for k in range(3):
                    for l in range(3):
                        acc += T[i, k] * Ic[k, l] * T[j, l]
                I_o[i, j] += acc + m * ((cc if i == j else 0.0) - c[i] * c[j])
        mass += m
        for i in range(3):
            first[i] += m * c[i]
    com = first / mass
    S = sp.skew(com)
    M = np.zeros((6, 6))
    for i in range(3):
        M[i, i] = mass
    M[:3, 3:] = -mass * S
    M[3:, :3] = mass * S
    M[3:, 3:] = I_o
    return M


@dataclass(frozen=True)
class AggregateInertia:
    M_c: np.ndarray
    mass: float
    com: np.ndarray
    inertia: np.ndarray
    T_w_c: np.ndarray

    @property
    def T_c_cm(self):
        return sp.translation(self.com)

    @property
    def T_w_cm(self):
        return self.T_w_c @ self.T_c_cm

    @property
    def inertia_cm(self):
        """Rotational inertia about the CoM in the CoM frame (aligned with the chassis)."""
        return self.inertia


def aggregate_inertia(model, state, mask=None, kin=None, T_w_c=None):
    """Sum every body inertia into the chassis frame and extract m, CoM, tensor.

    ``mask`` selects bodies (all by default). ``state`` may be ``None`` if a
    precomputed :class:`Kinematics` is passed.
    """
    if kin is None:
        kin = Kinematics(model, state, gravity=False)
    if T_w_c is None:
        T_w_c = chassis_frame(kin)[0]
    if mask is None:
        mask = np.ones(len(model.body_group), dtype=bool)
    M = _aggregate(kin.T_world, T_w_c, model.body_frame, model.body_inertia, np.asarray(mask))
    m, r, I = sp.extract_inertia(M)
    return AggregateInertia(M, m, r, I, T_w_c)


def inertia_in_world(M_c, T_w_c):
    """Chassis-frame aggregate re-expressed in the world frame."""
    return sp.transform_inertia(np.asarray(M_c, float), np.asarray(T_w_c, float))


def com_sensitivity(model, state, h=SENSITIVITY_STEP):
    """Jacobian of the chassis-frame CoM with respect to ``[x_R, x_L]`` (3x2).

    Central differences with step ``h``; one-sided next to the admissible
    stroke boundary. The base is re-seated on flat ground at every sample.
    """
    J = np.zeros((3, 2))

    def com(x):
        s = flat_ground_state(model, x, q_arm=state.q_arm, q_w=state.q_w)
        return aggregate_inertia(model, s).com

    x0 = np.asarray(state.x, float)
    for j, side in enumerate(("R", "L")):
        lo, hi = model.chains[side].stroke_limits()
        e = np.zeros(2)
        e[j] = h
        if x0[j] + h > hi:
            J[:, j] = (com(x0) - com(x0 - e)) / h
        elif x0[j] - h < lo:
            J[:, j] = (com(x0 + e) - com(x0)) / h
        else:
            J[:, j] = (com(x0 + e) - com(x0 - e)) / (2 * h)
    return J
