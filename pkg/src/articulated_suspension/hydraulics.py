"""Valve-controlled asymmetric cylinders driving the two suspension chains.

The piston coordinate used here, ``x_h``, runs from 0 (fully retracted,
chamber A empty) to the stroke ``s``. The suspension coordinate ``x`` of
:mod:`articulated_suspension.chain` is mapped to it by a constant offset,
see :attr:`HydraulicParams.offset`.

Units are SI throughout. The valve command ``u`` is normalised to
``[-1, 1]`` and the flow coefficients are per unit command, in
m^3 / (s sqrt(Pa)).
"""

import logging
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import ChamberDegenerate, ContractViolation

log = logging.getLogger(__name__)

#: Dead-volume guard on the piston coordinate (m).
X_EPS = 1e-4

_LPM = 1e-3 / 60.0


def rated_flow_coefficient(q_lpm=40.0, dp=3.5e6):
    """Coefficient giving ``q_lpm`` litres/min at full command and drop ``dp``."""
    return q_lpm * _LPM / np.sqrt(dp)


@dataclass(frozen=True)
class HydraulicParams:
    c_p1: float = rated_flow_coefficient()
    c_n1: float = rated_flow_coefficient()
    c_p2: float = rated_flow_coefficient()
    c_n2: float = rated_flow_coefficient()
    p_s: float = 21e6
    p_r: float = 0.1e6
    beta: float = 1.0e9
    s: float = 0.4
    A_a: float = np.pi * 0.05 ** 2
    A_b: float = np.pi * (0.05 ** 2 - 0.028 ** 2)
    #: ``x_h = x + offset`` maps the suspension coordinate onto the piston.
    offset: float = 0.3
    x_eps: float = X_EPS
    #: Use the supply term of ``Q_b`` with a plus sign. That form drains
    #: chamber B while the valve connects it to supply, so the default is
    #: the sign that fills it.
    literal_flow_law: bool = False

    def __post_init__(self):
        for name in ("c_p1", "c_n1", "c_p2", "c_n2", "beta", "s"):
            if not getattr(self, name) > 0:
                raise ContractViolation(f"{name} must be positive")
        if not self.A_a > self.A_b > 0:
            raise ContractViolation("need A_a > A_b > 0")
        if not self.p_s > self.p_r >= 0:
            raise ContractViolation("need p_s > p_r >= 0")

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: (bool(v) if k == "literal_flow_law" else float(v))
                      for k, v in (d or {}).items()})

    def to_dict(self):
        return asdict(self)

    def piston(self, x):
        return x + self.offset


@dataclass(frozen=True)
class HydraulicState:
    p_a: float
    p_b: float
    u: float = 0.0
    #: Set when the step that produced this state had to clamp a pressure.
    clamped: bool = False

    def __post_init__(self):
        if abs(self.u) > 1.0:
            raise ContractViolation(f"valve command {self.u} outside [-1, 1]")


def selector(u):
    """1 for ``u > 0``, else 0."""
    return 1.0 if u > 0.0 else 0.0


def pressure_drop(dp):
    """Signed square root ``sign(dp) sqrt(|dp|)``."""
    return np.sign(dp) * np.sqrt(abs(dp))


def _flows(P, p_a, p_b, u):
    v = pressure_drop
    sp, sn = selector(u), selector(-u)
    Q_a = P.c_p1 * v(P.p_s - p_a) * u * sp + P.c_n1 * v(p_a - P.p_r) * u * sn
    supply = 1.0 if P.literal_flow_law else -1.0
    Q_b = -P.c_n2 * v(p_b - P.p_r) * u * sp + supply * P.c_p2 * v(P.p_s - p_b) * u * sn
    return Q_a, Q_b


def valve_flows(params, hstate):
    """Chamber inflows ``(Q_a, Q_b)`` in m^3/s.

    For ``u > 0`` supply feeds A and B drains to tank; for ``u < 0`` the
    other way round (see :attr:`HydraulicParams.literal_flow_law`).
    """
    return _flows(params, hstate.p_a, hstate.p_b, hstate.u)


def _check_chamber(P, x_h):
    if x_h <= P.x_eps or x_h >= P.s - P.x_eps:
        raise ChamberDegenerate(f"piston position {x_h:.6g} m outside ({P.x_eps}, {P.s - P.x_eps})")


def _rates(P, p_a, p_b, u, x_h, xd):
    Q_a, Q_b = _flows(P, p_a, p_b, u)
    pa_dot = P.beta / (P.A_a * x_h) * (Q_a - P.A_a * xd)
    pb_dot = P.beta / (P.A_b * (P.s - x_h)) * (Q_b + P.A_b * xd)
    return pa_dot, pb_dot


def pressure_rates(params, hstate, x, xd):
    """Chamber pressure derivatives at piston position ``x`` (in ``(0, s)``)."""
    _check_chamber(params, x)
    return _rates(params, hstate.p_a, hstate.p_b, hstate.u, x, xd)


def piston_force(params, hstate):
    return params.A_a * hstate.p_a - params.A_b * hstate.p_b


def track_position(k_p, x_r, x_measured):
    """Proportional valve command, saturated to ``[-1, 1]``."""
    return float(np.clip(k_p * (x_r - x_measured), -1.0, 1.0))


def hydraulic_step(params, hstate, x, xd, dt):
    """One RK4 step of the pressure dynamics with ``x`` and ``xd`` held.

    Pressures leaving ``[p_r, p_s]`` are clamped; the returned state says so
    and the event is logged at debug level.
    """
    if not dt > 0:
        raise ContractViolation("dt must be positive")
    _check_chamber(params, x)
    P, u = params, hstate.u
    y = np.array([hstate.p_a, hstate.p_b])
    f = lambda y: np.array(_rates(P, y[0], y[1], u, x, xd))  # noqa: E731
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    lo, hi = P.p_r, P.p_s
    clamped = bool(np.any(y < lo) or np.any(y > hi))
    if clamped:
        log.debug("pressure clamp: p_a=%.6g p_b=%.6g", y[0], y[1])
        y = np.clip(y, lo, hi)
    return replace(hstate, p_a=float(y[0]), p_b=float(y[1]), clamped=clamped)


@dataclass
class TrackingLoop:
    """Closed-loop position tracking of a set of cylinders on the mechanism.

    The mechanism enters through its mass matrix ``H`` along the actuator
    coordinates and the bias force ``tau`` the actuators must supply at
    zero acceleration (gravity, velocity and command terms), so that
    ``H xdd = f_p - tau - damping xd``. Pressures are advanced by
    :func:`hydraulic_step`, positions by semi-implicit Euler.
    """

    params: HydraulicParams
    x: np.ndarray
    xd: np.ndarray = None
    k_p: float = 10.0
    damping: float = 3e4
    states: list = None
    #: Number of actuator steps that clamped a pressure.
    clamps: int = 0

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)
        self.xd = np.zeros_like(self.x) if self.xd is None else np.array(self.xd, dtype=float)

    def equilibrate(self, tau, p_b=None):
        """Pressures that hold the bias force ``tau`` with the valves closed."""
        P = self.params
        p_b = 0.25 * (P.p_s + P.p_r) if p_b is None else p_b
        self.states = []
        for f in np.atleast_1d(tau):
            p_a = float(np.clip((f + P.A_b * p_b) / P.A_a, P.p_r, P.p_s))
            self.states.append(HydraulicState(p_a, float(p_b), 0.0))
        return self.states

    def forces(self):
        return np.array([piston_force(self.params, s) for s in self.states])

    def step(self, x_r, H, tau, dt):
        """Advance by ``dt`` toward ``x_r``; returns the accelerations used."""
        P = self.params
        x_r = np.atleast_1d(x_r)
        for j, s in enumerate(self.states):
            u = track_position(self.k_p, x_r[j], self.x[j])
            self.states[j] = hydraulic_step(P, replace(s, u=u), P.piston(self.x[j]),
                                            self.xd[j], dt)
            self.clamps += self.states[j].clamped
        rhs = self.forces() - np.atleast_1d(tau) - self.damping * self.xd
        xdd = np.linalg.solve(np.atleast_2d(H), rhs)
        self.xd = self.xd + dt * xdd
        self.x = self.x + dt * self.xd
        return xdd
