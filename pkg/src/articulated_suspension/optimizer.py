"""One-step stability optimisation of the suspension actuators.

At every control step the next actuator state ``(x, xd, xdd)_{k+1}`` is
chosen to minimise

    f = sum_{unordered pairs} psi_ij (f_i - f_j)^2 + sum_k psi_k / eta_k

subject to non-negative normal forces, box bounds on position, velocity and
acceleration (the latter two evaluated at ``x_k``) and the backward-Euler
consistency ``x_{k+1} = x_k + dt xd_{k+1}``, ``xd_{k+1} = xd_k + dt xdd_{k+1}``.

The consistency equations are eliminated, leaving ``z = xdd_{k+1}`` (one
scalar per actuator, or one in total in symmetric mode). All three boxes
map to an interval on ``z``. The reduced problem is solved by a small SQP:
central finite differences for the gradient, force Jacobian and Hessian
(clipped to positive semidefinite), a QP by active-set enumeration and an
l1 merit line search.

``horizon`` (default ``dt``) separates the step the boxes apply to from
the point the cost is evaluated at: the boxes constrain the executed state
after ``dt``, while the cost is taken at ``x_k + h xd``, ``xd = xd_k + h z``
with ``h = horizon``, i.e. where the actuators would be after holding the
acceleration ``z`` for one horizon. That predicted position is kept inside
the position box too. The commands in the problem then belong
to ``t_k + horizon``. With ``horizon == dt`` both coincide.
"""

import itertools
import logging
import copy
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import ContractViolation, Infeasible, MaxIterations, NonPositiveAngle
from .model import WHEELS

log = logging.getLogger(__name__)

#: Central-difference step on the reduced variable ``z`` (m/s^2).
FD_STEP = 1e-4
#: Stationarity tolerance. With ``r = g - A^T lam`` and ``width`` the feasible
#: interval of ``z``, the residual is the smaller of the first-order cost change
#: across the box, ``max |r| width / (1 + |f|)``, and the Newton distance to a
#: stationary point, ``max |B^-1 r| / width``.
KKT_TOL = 1e-6
MAX_ITER = 25

#: Unordered wheel pairs, indices into ``WHEELS`` (FR, FL, RR, RL).
PAIRS = tuple(itertools.combinations(range(4), 2))
#: Edges of the support polygon, counter-clockwise seen from above.
EDGES = (("front", 0, 1), ("left", 1, 3), ("rear", 3, 2), ("right", 2, 0))


def default_pair_weights(front_rear=1.0, lateral=1e-3):
    """Pair weights: ``lateral`` for FR-FL and RR-RL, ``front_rear`` otherwise."""
    lat = {(0, 1), (2, 3)}
    return np.array([lateral if p in lat else front_rear for p in PAIRS])


def default_angle_weights(front_rear=100.0, lateral=10.0):
    """Weights in :data:`EDGES` order (front, left, rear, right)."""
    return np.array([front_rear, lateral, front_rear, lateral])


@dataclass(frozen=True)
class BoundParams:
    """Caps and steepness of the arctan-shaped rate and acceleration bounds."""

    v_cap: float = 0.05
    a_cap: float = 0.5
    gamma_v: float = 50.0
    gamma_a: float = 50.0

    def __post_init__(self):
        if not (self.v_cap > 0 and self.a_cap > 0 and self.gamma_v > 0 and self.gamma_a > 0):
            raise ContractViolation("bound caps and steepness must be positive")


def smooth_bounds(x_k, x_min, x_max, params=BoundParams()):
    """``(xd_min, xd_max, xdd_min, xdd_max)`` at actuator position ``x_k``.

    Each bound is ``cap * (2/pi) * arctan(gamma * distance)`` with the
    distance to the limit the bound points at, so it pinches to zero at that
    limit and saturates at the cap far from it.
    """
    x_k, x_min, x_max = (np.asarray(v, dtype=float) for v in (x_k, x_min, x_max))
    up = np.maximum(x_max - x_k, 0.0)
    down = np.maximum(x_k - x_min, 0.0)
    k = 2.0 / np.pi
    P = params
    return (-P.v_cap * k * np.arctan(P.gamma_v * down),
            P.v_cap * k * np.arctan(P.gamma_v * up),
            -P.a_cap * k * np.arctan(P.gamma_a * down),
            P.a_cap * k * np.arctan(P.gamma_a * up))


_EDGE_IDX = np.array([[i, j] for _, i, j in EDGES], dtype=np.int64)
_PAIR_IDX = np.array(PAIRS, dtype=np.int64)


@njit(cache=True)
def _angles(c, V):
    eta = np.empty(4)
    for k in range(4):
        i, j = _EDGE_IDX[k, 0], _EDGE_IDX[k, 1]
        a = V[j] - V[i]
        a = a / np.sqrt(np.sum(a * a))
        d = V[i] - c
        d = d - np.sum(d * a) * a
        nx, ny = a[1], -a[0]
        nn = np.sqrt(nx * nx + ny * ny)
        eta[k] = np.arctan2((d[0] * nx + d[1] * ny) / nn, -d[2])
    return eta


@njit(cache=True)
def _force_cost(f, pw):
    out = 0.0
    for k in range(_PAIR_IDX.shape[0]):
        r = f[_PAIR_IDX[k, 0]] - f[_PAIR_IDX[k, 1]]
        out += pw[k] * r * r
    return out


@njit(cache=True)
def _cost(forces, com, contacts, pw, aw):
    V = contacts + com
    eta = _angles(com, V)
    if np.min(eta) <= 0.0:
        return np.inf, eta
    return _force_cost(forces, pw) + np.sum(aw / eta), eta


def stability_angles(r_cm_c, vertices):
    """Force-angle stability margins about the four support-polygon edges.

    ``vertices`` are the contact points ``[FR, FL, RR, RL]`` and ``r_cm_c``
    the centre of mass, all in the chassis frame (z up). For each edge the
    angle is measured between gravity and the perpendicular from the CoM to
    the edge axis; it is positive while the CoM projects inside the edge.
    Returned in :data:`EDGES` order.
    """
    eta = _angles(np.asarray(r_cm_c, dtype=float), np.asarray(vertices, dtype=float))
    for k, (name, _, _) in enumerate(EDGES):
        if not eta[k] > 0.0:
            raise NonPositiveAngle(name, float(eta[k]))
    return eta


def force_cost(forces, pair_weights):
    """``1/2 sum_{i != j} psi_ij (f_i - f_j)^2`` with symmetric weights."""
    return float(_force_cost(np.asarray(forces, dtype=float),
                             np.asarray(pair_weights, dtype=float)))


@dataclass(frozen=True)
class Commands:
    """Manipulator and wheel commands (and chassis motion) at one instant."""

    q_arm: np.ndarray
    qd_arm: np.ndarray = None
    qdd_arm: np.ndarray = None
    q_w: np.ndarray = None
    qd_w: np.ndarray = None
    qdd_w: np.ndarray = None
    chassis: np.ndarray = None

    def as_kwargs(self):
        return dict(q_arm=self.q_arm, qd_arm=self.qd_arm, qdd_arm=self.qdd_arm,
                    q_w=self.q_w, qd_w=self.qd_w, qdd_w=self.qdd_w, chassis=self.chassis)


@dataclass(frozen=True)
class OptProblem:
    pipeline: object
    x_k: np.ndarray
    xd_k: np.ndarray
    xdd_k: np.ndarray
    dt: float
    commands: Commands
    x_min: np.ndarray
    x_max: np.ndarray
    pair_weights: np.ndarray = field(default_factory=default_pair_weights)
    angle_weights: np.ndarray = field(default_factory=default_angle_weights)
    bounds: BoundParams = BoundParams()
    symmetric: bool = False
    warm_start: np.ndarray = None
    horizon: float = None

    def __post_init__(self):
        if self.horizon is None:
            object.__setattr__(self, "horizon", self.dt)
        for name in ("x_k", "xd_k", "xdd_k", "x_min", "x_max"):
            object.__setattr__(self, name, np.broadcast_to(
                np.asarray(getattr(self, name), dtype=float), (2,)).copy())
        if not (self.dt > 0 and self.horizon > 0):
            raise ContractViolation("dt and horizon must be positive")
        if not np.all(self.x_min < self.x_max):
            raise ContractViolation("need x_min < x_max")
        if np.any(np.asarray(self.pair_weights) < 0) or np.any(np.asarray(self.angle_weights) < 0):
            raise ContractViolation("weights must be non-negative")

    @property
    def n(self):
        return 1 if self.symmetric else 2

    def expand(self, z, step=None):
        """Candidate ``(x, xd, xdd)`` after ``step`` (default ``dt``)."""
        z = np.asarray(z, dtype=float)
        h = self.dt if step is None else step
        xdd = np.full(2, z[0]) if self.symmetric else z.copy()
        xd = self.xd_k + h * xdd
        x = self.x_k + h * xd
        return x, xd, xdd

    def predict(self, z):
        """State the cost is evaluated at."""
        return self.expand(z, self.horizon)

    def interval(self):
        """Bounds on ``z`` from the three boxes, plus the per-box pieces."""
        dt = self.dt
        vmin, vmax, amin, amax = smooth_bounds(self.x_k, self.x_min, self.x_max, self.bounds)
        base = self.x_k + dt * self.xd_k
        h = self.horizon
        ahead = self.x_k + h * self.xd_k
        # rows: x, x_pred (the predicted position stays in the stroke too), xd, xdd
        los = np.array([(self.x_min - base) / dt ** 2, (self.x_min - ahead) / h ** 2,
                        (vmin - self.xd_k) / dt, amin])
        his = np.array([(self.x_max - base) / dt ** 2, (self.x_max - ahead) / h ** 2,
                        (vmax - self.xd_k) / dt, amax])
        if self.symmetric:
            los = los.max(axis=1, keepdims=True)
            his = his.min(axis=1, keepdims=True)
        boxes = {k: (los[i], his[i]) for i, k in enumerate(("x", "x_pred", "xd", "xdd"))}
        lo = los.max(axis=0)
        hi = his.min(axis=0)
        return lo, hi, boxes


class CostTerms(NamedTuple):
    value: float
    forces: np.ndarray
    angles: np.ndarray
    com: np.ndarray
    angles_ok: bool


def _qp1(g, B, a, b, tol):
    lo, hi, i_lo, i_hi = -np.inf, np.inf, -1, -1
    for k in range(len(b)):
        if a[k] > 0 and b[k] / a[k] > lo:
            lo, i_lo = b[k] / a[k], k
        elif a[k] < 0 and b[k] / a[k] < hi:
            hi, i_hi = b[k] / a[k], k
        elif a[k] == 0 and b[k] > tol:
            return None
    if lo > hi + tol * (1 + abs(lo)):
        return None
    d = min(max(-g / B, lo), hi)
    lam = np.zeros(len(b))
    r = g + B * d
    if d == lo and i_lo >= 0 and r > 0:
        lam[i_lo] = r / a[i_lo]
    elif d == hi and i_hi >= 0 and r < 0:
        lam[i_hi] = r / a[i_hi]
    return np.array([d]), lam


_NAN4 = np.full(4, np.nan)


class _Evaluator:
    """Cost evaluation with the commands packed once per problem."""

    def __init__(self, problem):
        self.p = problem
        self.pipe = problem.pipeline
        self.packed = self.pipe.pack(**problem.commands.as_kwargs())
        self.pw = np.asarray(problem.pair_weights, dtype=float)
        self.aw = np.asarray(problem.angle_weights, dtype=float)
        self.count = 0

    def candidate(self, x, xd, xdd):
        self.count += 1
        f, _, com, contacts, _, _ = self.pipe.evaluate_packed(x, xd, xdd, self.packed)
        value, eta = _cost(f, com, contacts, self.pw, self.aw)
        ok = value < np.inf
        return CostTerms(value, f, eta if ok else _NAN4, com, ok)

    def __call__(self, z):
        return self.candidate(*self.p.predict(z))


def cost_terms(problem, candidate):
    """Cost of a candidate ``(x, xd, xdd)`` and the quantities behind it."""
    return _Evaluator(problem).candidate(*candidate)


def evaluate_cost(problem, candidate):
    """Scalar cost; ``inf`` when the CoM leaves the support polygon."""
    return cost_terms(problem, candidate).value


@dataclass(frozen=True)
class OptSolution:
    x: np.ndarray
    xd: np.ndarray
    xdd: np.ndarray
    cost: float
    forces: np.ndarray
    residuals: dict
    status: str
    iterations: int
    evaluations: int
    kkt: float


def _qp(g, B, A, b, tol=1e-9):
    """``min g.d + d.B.d/2`` s.t. ``A d >= b`` by active-set enumeration.

    Intended for ``len(g) <= 2``. Returns ``(d, lam)`` with ``lam`` the
    multipliers of all rows (zero for inactive ones), or ``None``.
    """
    n, m = len(g), len(b)
    if n == 1:
        return _qp1(g[0], B[0, 0], A[:, 0], b, tol)
    best = None
    scale = 1.0 + np.abs(b).max() if m else 1.0
    for size in range(min(n, m) + 1):
        for S in itertools.combinations(range(m), size):
            S = list(S)
            As = A[S]
            K = np.zeros((n + size, n + size))
            K[:n, :n] = B
            K[:n, n:] = -As.T
            K[n:, :n] = As
            rhs = np.concatenate([-g, b[S]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            d, lam_s = sol[:n], sol[n:]
            if np.any(lam_s < -tol * (1 + np.abs(g).max())):
                continue
            if np.any(A @ d - b < -tol * scale):
                continue
            obj = g @ d + 0.5 * d @ B @ d
            if best is None or obj < best[0]:
                lam = np.zeros(m)
                lam[S] = np.maximum(lam_s, 0.0)
                best = (obj, d, lam)
    return None if best is None else (best[1], best[2])


def solve_step(problem, max_iter=MAX_ITER, strict=False):
    """Next actuator state; see the module docstring for the method.

    Infeasible boxes put the solver in restoration: ``z`` is taken from the
    acceleration box, as close as possible to the other two, and the status
    says so. With ``strict`` an empty box raises :class:`Infeasible` instead,
    and running out of iterations raises :class:`MaxIterations` (which
    carries the best iterate) rather than returning it with that status.
    Negative normal forces at the returned point raise :class:`Infeasible`.
    """
    P = problem
    n, dt = P.n, P.dt
    lo, hi, boxes = P.interval()
    status = "optimal"
    if np.any(lo > hi):
        worst = max(boxes, key=lambda k: np.max(boxes[k][0] - hi))
        if strict:
            raise Infeasible(f"{worst} bounds", float(np.max(lo - hi)))
        a_lo, a_hi = boxes["xdd"]
        others = [b for k, b in boxes.items() if k != "xdd"]
        tgt_lo = np.max([b[0] for b in others], axis=0)
        tgt_hi = np.min([b[1] for b in others], axis=0)
        target = np.where(tgt_lo > tgt_hi, 0.5 * (tgt_lo + tgt_hi), np.clip(0.0, tgt_lo, tgt_hi))
        z = np.clip(target, a_lo, a_hi)
        lo = hi = z
        status = "restoration"
        log.info("solve_step restoration: boxes %s", boxes)

    h = FD_STEP
    width = np.maximum(hi - lo, h)
    ev = _Evaluator(P)
    z = np.zeros(n) if P.warm_start is None else np.asarray(P.warm_start, float)[:n].copy()
    z = np.clip(z, lo, hi)

    def linearise(z, c0):
        J = np.empty((4, n))
        g = np.empty(n)
        Hf = np.empty((n, n))
        side = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            cp, cm = ev(z + e), ev(z - e)
            side.append((cp.value, cm.value))
            J[:, i] = (cp.forces - cm.forces) / (2 * h)
            g[i] = (cp.value - cm.value) / (2 * h)
            Hf[i, i] = (cp.value - 2.0 * c0.value + cm.value) / h ** 2
        if n == 2:
            pp, mm_ = ev(z + h).value, ev(z - h).value
            Hf[0, 1] = Hf[1, 0] = (pp + mm_ - sum(side[0]) - sum(side[1]) + 2.0 * c0.value) / (2 * h ** 2)
        # finite-difference Hessian clipped to positive semidefinite
        if n == 1:
            B = np.maximum(Hf, 0.0)
        else:
            w, V = np.linalg.eigh(Hf)
            B = (V * np.maximum(w, 0.0)) @ V.T
        B += (1e-12 * max(np.trace(B), 1.0)) * np.eye(n)
        return g, J, B

    def rows(z, forces, J):
        A = np.vstack([np.eye(n), -np.eye(n), J])
        b = np.concatenate([lo - z, z - hi, -forces])
        return A, b

    def merit(c, mu):
        return c.value + mu * np.sum(np.maximum(-c.forces, 0.0))

    cur = ev(z)
    if not np.isfinite(cur.value):
        # start from the middle of the box if the warm start left the polygon
        z = 0.5 * (lo + hi)
        cur = ev(z)
    mu = 1.0
    kkt = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g, J, B = linearise(z, cur)
        A, b = rows(z, cur.forces, J)
        sol = _qp(g, B, A, b)
        if sol is None:
            # linearised positivity cannot hold inside the box: drop it
            sol = _qp(g, B, A[:2 * n], b[:2 * n])
            status = "positivity_relaxed"
        d, lam = sol
        r = g - A.T @ lam
        kkt = float(min(np.max(np.abs(r) * width) / (1.0 + abs(cur.value)),
                        np.max(np.abs(r / B[0, 0] if n == 1 else np.linalg.solve(B, r)) / width)))
        # steps below the finite-difference resolution are noise, and so
        # are predicted gains below the precision of the cost
        gain = -(g @ d + 0.5 * d @ B @ d)
        if np.all(np.abs(d) <= 1e-3 * h) or (kkt <= KKT_TOL and gain <= 1e-10 * (1.0 + abs(cur.value))):
            break
        mu = max(mu, 1.1 * float(np.max(lam[2 * n:], initial=0.0)))
        m0 = merit(cur, mu)
        slope = g @ d - mu * np.sum(np.maximum(-cur.forces, 0.0))
        alpha = 1.0
        while True:
            trial = ev(z + alpha * d)
            if merit(trial, mu) <= m0 + 1e-4 * alpha * min(slope, 0.0) or alpha < 1e-8:
                break
            alpha *= 0.5
        z_new = np.clip(z + alpha * d, lo, hi)
        log.debug("sqp it %d z=%s f=%.12g g=%s B=%s d=%s alpha=%g kkt=%g", it, z, cur.value, g, B.ravel(), d, alpha, kkt)
        if alpha < 1e-8 or np.array_equal(z_new, z):
            break
        z, cur = z_new, trial
    else:
        status = "max_iterations" if status == "optimal" else status

    x, xd, xdd = P.expand(z)
    if cur.forces.min() < 0.0:
        i = int(np.argmin(cur.forces))
        raise Infeasible(f"f_{WHEELS[i]} >= 0", float(-cur.forces[i]))
    res = {
        "position_consistency": float(np.max(np.abs(x - P.x_k - dt * xd))),
        "velocity_consistency": float(np.max(np.abs(xd - P.xd_k - dt * xdd))),
    }
    sol = OptSolution(x, xd, xdd, float(cur.value), cur.forces, res, status, it, ev.count, kkt)
    if strict and status == "max_iterations":
        raise MaxIterations(sol)
    return sol


def grid_search(problem, points=2001):
    """Dense evaluation of the reduced cost over its feasible box (oracle)."""
    lo, hi, _ = problem.interval()
    axes = [np.linspace(a, b, points if problem.n == 1 else int(np.sqrt(points)) + 1)
            for a, b in zip(lo, hi)]
    best = (np.inf, None)
    costs = []
    for z in itertools.product(*axes):
        c = evaluate_cost(problem, problem.predict(np.array(z)))
        costs.append(c)
        if c < best[0]:
            best = (c, np.array(z))
    return best[0], best[1], axes, np.array(costs)


def with_state(problem, x_k, xd_k, xdd_k, commands, warm_start=None):
    """Copy of ``problem`` at a new state; skips re-validating the unchanged fields."""
    new = copy.copy(problem)
    for name, v in (("x_k", x_k), ("xd_k", xd_k), ("xdd_k", xdd_k)):
        object.__setattr__(new, name, np.broadcast_to(np.asarray(v, dtype=float), (2,)).copy())
    object.__setattr__(new, "commands", commands)
    object.__setattr__(new, "warm_start", warm_start)
    return new
