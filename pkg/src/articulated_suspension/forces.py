"""Wheel normal forces on flat ground from the variable inertial parameters.

The ground has to supply the wrench ``W`` that keeps the machine on its
current trajectory. Expressed at the CoM frame (origin at the machine CoM,
axes aligned with the chassis, z up) it is the sum of

* the rigid-body wrench of the platform bodies, using their aggregate
  spatial inertia at the current suspension configuration and the motion of
  the CoM frame, and
* the manipulator wrench ``F_m`` transported from the manipulator frame.

Four normal forces at the contact points ``(x_i, y_i, -h)`` and a tangential
resultant in the ground plane must reproduce ``W``. Only three rows involve
the normal forces::

    sum f_i            = W_fz
    sum  y_i f_i       = W_nx - h W_fy
    sum -x_i f_i       = W_ny + h W_fx

which leaves one degree of indeterminacy (the diagonal twist mode). It is
resolved with the minimum-norm solution.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import spatial as sp
from .dynamics import aggregate_inertia
from .errors import CenterOfMassOutsideWheelbase
from .model import WHEELS, Kinematics, chassis_frame

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForceInputs:
    F_m: np.ndarray
    T_cm_m: np.ndarray
    T_w_cm: np.ndarray
    nu_cm: np.ndarray
    nu_cm_dot: np.ndarray
    M_platform: np.ndarray
    contacts: np.ndarray
    mass: float
    com_c: np.ndarray
    inertia_c: np.ndarray

    @property
    def height(self):
        return -float(self.contacts[:, 2].mean())

    @property
    def l1(self):
        """Distance from the CoM back to the rear axle along x."""
        return -0.5 * float(self.contacts[2, 0] + self.contacts[3, 0])

    @property
    def l2(self):
        """Distance from the CoM forward to the front axle along x."""
        return 0.5 * float(self.contacts[0, 0] + self.contacts[1, 0])

    @property
    def half_track(self):
        return 0.25 * float(np.sum(np.abs(self.contacts[[1, 3], 1] - self.contacts[[0, 2], 1])))

    def contact_wrench(self):
        """Wrench the ground must apply, expressed at the CoM frame."""
        W = sp.body_wrench(self.M_platform, self.nu_cm, self.nu_cm_dot)
        return W + sp.coadjoint(self.T_cm_m) @ self.F_m


@dataclass(frozen=True)
class NormalForces:
    forces: np.ndarray
    residual: float

    @property
    def liftoff(self):
        """True when a wheel would need to pull on the ground."""
        return bool(np.any(self.forces < 0.0))

    def __getattr__(self, name):
        if name.startswith("f_") and name[2:] in WHEELS:
            return float(self.forces[WHEELS.index(name[2:])])
        raise AttributeError(name)


def contact_points(model, kin, T_w_cm):
    """Ground contact points (below each wheel centre) in the CoM frame."""
    out = np.empty((4, 3))
    Tinv = sp.inverse(T_w_cm)
    for i, w in enumerate(WHEELS):
        p = kin.pose("w" + w)[:3, 3].copy()
        p[2] = 0.0
        out[i] = Tinv[:3, :3] @ p + Tinv[:3, 3]
    return out


def force_inputs(model, state, kin=None):
    """Evaluate every input of :func:`normal_forces` at ``state``."""
    if kin is None:
        kin = Kinematics(model, state)
    T_w_c, nu_c, nu_c_dot = chassis_frame(kin)
    whole = aggregate_inertia(model, None, kin=kin, T_w_c=T_w_c)
    plat = aggregate_inertia(model, None, mask=model.platform_mask, kin=kin, T_w_c=T_w_c)
    T_w_cm = whole.T_w_cm
    X = sp.adjoint(sp.inverse(whole.T_c_cm))
    return ForceInputs(
        F_m=kin.total_wrench("m"),
        T_cm_m=sp.inverse(T_w_cm) @ kin.pose("m"),
        T_w_cm=T_w_cm,
        nu_cm=X @ nu_c,
        nu_cm_dot=X @ nu_c_dot,
        M_platform=sp.transform_inertia(plat.M_c, sp.inverse(whole.T_c_cm)),
        contacts=contact_points(model, kin, T_w_cm),
        mass=whole.mass,
        com_c=whole.com,
        inertia_c=whole.inertia,
    )


def equilibrium_system(inputs):
    """Rows and right-hand side of the normal-force balance."""
    W = inputs.contact_wrench()
    c = inputs.contacts
    h = inputs.height
    A = np.vstack([np.ones(4), c[:, 1], -c[:, 0]])
    b = np.array([W[2], W[3] - h * W[1], W[4] + h * W[0]])
    return A, b


def normal_forces(inputs, check_wheelbase=True):
    """Minimum-norm normal forces ``[FR, FL, RR, RL]`` satisfying the balance.

    Negative forces are returned as they are (see :attr:`NormalForces.liftoff`).
    """
    if check_wheelbase and not (inputs.l1 > 0 and inputs.l2 > 0):
        raise CenterOfMassOutsideWheelbase(f"l1={inputs.l1:.4g}, l2={inputs.l2:.4g}")
    A, b = equilibrium_system(inputs)
    f = A.T @ np.linalg.solve(A @ A.T, b)
    res = float(np.abs(A @ f - b).max())
    out = NormalForces(f, res)
    if out.liftoff:
        log.debug("wheel liftoff: %s", f)
    return out


def exact_contact_wrench(model, kin, T_w_cm):
    """Ground wrench from Newton-Euler over every body, at the CoM frame.

    Used to cross-check :meth:`ForceInputs.contact_wrench`; the two agree
    whenever the platform bodies do not move relative to each other.
    """
    mask = np.ones(len(model.body_group), dtype=bool)
    W_world = kin.total_wrench("world", mask=mask)
    return sp.coadjoint(sp.inverse(T_w_cm)) @ W_world
