"""Runtime invariant suite for a model file.

Every check samples the model, measures the worst violation of one
invariant and compares it against a fixed tolerance. The suite is what
``suspension-sim validate`` runs; the test suite pins the same invariants
against independent oracles.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import chain as ch
from .dynamics import aggregate_inertia
from .forces import equilibrium_system, force_inputs, normal_forces
from .model import SIDES, Kinematics, PlatformState, flat_ground_state
from .pipeline import ForcePipeline

STAGES = ("closure", "branches", "rates", "aggregation", "normal_forces")

TOL = {
    "closure": 1e-12,
    "branch_twist": 1e-10,
    "branch_accel": 1e-8,
    "rate_sum": 1e-12,
    "rate_fd": 1e-6,
    "mass_invariance": 1e-12,
    "inertia_symmetry": 1e-12,
    "inertia_psd": -1e-9,
    "equilibrium": 1e-8,
    "pipeline_agreement": 1e-9,
}


@dataclass(frozen=True)
class Check:
    stage: str
    name: str
    value: float
    tol: float
    passed: bool
    seconds: float

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.stage:<14}{self.name:<22}{self.value:11.3e} (tol {self.tol:.0e})"


def _check(stage, name, value, tol, t0, lower=False):
    ok = bool(value >= tol) if lower else bool(value < tol)
    return Check(stage, name, float(value), tol, ok, time.perf_counter() - t0)


def _sweep(model, side, n, margin=0.05):
    """``n`` strokes spread over the admissible range, ``margin`` of it trimmed off each end."""
    lo, hi = model.chains[side].stroke_limits()
    w = hi - lo
    return np.linspace(lo + margin * w, hi - margin * w, n)


def check_closure(model, n=10_000):
    t0 = time.perf_counter()
    worst = 0.0
    for side in SIDES:
        g = model.chains[side]
        for x in _sweep(model, side, n, margin=0.0):
            q, q1, q2 = ch.inner_angles(g, x)
            worst = max(worst, abs(q + q1 + q2 + np.pi))
    return [_check("closure", "angle_sum", worst, TOL["closure"], t0)]


def random_state(model, rng, x=None):
    """A state with every coordinate, rate and acceleration drawn at random."""
    if x is None:
        x = [rng.uniform(*_sweep(model, s, 2, 0.1)) for s in SIDES]
    r = lambda k: rng.uniform(-1.0, 1.0, k)  # noqa: E731
    n = model.n_arm
    return PlatformState(q_fb=r(6), q_arm=r(n) * np.pi, q_w=r(4) * np.pi, x=x,
                         qd_fb=r(6), qd_arm=r(n), qd_w=r(4), xd=r(2) * 0.1,
                         qdd_fb=r(6), qdd_arm=r(n), qdd_w=r(4), xdd=r(2))


def check_branches(model, n=1000, seed=0):
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    dv = da = 0.0
    for _ in range(n):
        k = Kinematics(model, random_state(model, rng))
        for side in SIDES:
            a, b = model.frame(f"Tc_{side}"), model.frame(f"Tcb_{side}")
            dv = max(dv, np.abs(k.nu[a] - k.nu[b]).max())
            da = max(da, np.abs(k.acc[a] - k.acc[b]).max())
    return [_check("branches", "twist", dv, TOL["branch_twist"], t0),
            _check("branches", "accel", da, TOL["branch_accel"], t0)]


def check_rates(model, n=1000, h=1e-6):
    t0 = time.perf_counter()
    s = fd = 0.0
    for side in SIDES:
        g = model.chains[side]
        for x in _sweep(model, side, n):
            k = ch.rate_coefficients(g, x, 0.0)[:3]
            s = max(s, abs(sum(k)))
            num = (np.array(ch.inner_angles(g, x + h)) - np.array(ch.inner_angles(g, x - h))) / (2 * h)
            fd = max(fd, np.abs(num - k).max() / np.abs(k).max())
    return [_check("rates", "sum", s, TOL["rate_sum"], t0),
            _check("rates", "finite_difference", fd, TOL["rate_fd"], t0)]


def check_aggregation(model, n=200):
    t0 = time.perf_counter()
    m0 = model.total_mass
    dm = asym = 0.0
    eig = np.inf
    for a, b in zip(_sweep(model, "R", n), _sweep(model, "L", n)[::-1]):
        M = aggregate_inertia(model, flat_ground_state(model, [a, b])).M_c
        dm = max(dm, abs(M[0, 0] - m0) / m0)
        asym = max(asym, np.abs(M - M.T).max() / np.abs(M).max())
        eig = min(eig, np.linalg.eigvalsh(0.5 * (M + M.T)).min() / np.abs(M).max())
    return [_check("aggregation", "mass_invariance", dm, TOL["mass_invariance"], t0),
            _check("aggregation", "symmetry", asym, TOL["inertia_symmetry"], t0),
            _check("aggregation", "min_eigenvalue", eig, TOL["inertia_psd"], t0, lower=True)]


def check_normal_forces(model, n=1000, seed=0):
    """Balance residual of the reference path and its agreement with the compiled pipeline."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    pipe = ForcePipeline(model)
    res = gap = 0.0
    for _ in range(n):
        x = [rng.uniform(lo, hi) for lo, hi in zip(model.x_min, model.x_max)]
        nr = model.n_arm
        q_arm, qd_arm, qdd_arm = (rng.uniform(-1, 1, nr) for _ in range(3))
        qd_w = rng.uniform(-1, 1, 4)
        xd, xdd = rng.uniform(-0.1, 0.1, 2), rng.uniform(-1, 1, 2)
        s = flat_ground_state(model, x, xd, xdd, q_arm, qd_arm, qdd_arm, qd_w=qd_w)
        inp = force_inputs(model, s)
        f = normal_forces(inp, check_wheelbase=False)
        A, b = equilibrium_system(inp)
        res = max(res, np.abs(A @ f.forces - b).max() / max(1.0, np.abs(b).max()))
        out = pipe(x, xd, xdd, q_arm, qd_arm, qdd_arm, qd_w=qd_w, check_wheelbase=False)
        gap = max(gap, np.abs(out.forces - f.forces).max() / np.abs(f.forces).max())
    return [_check("normal_forces", "equilibrium", res, TOL["equilibrium"], t0),
            _check("normal_forces", "pipeline_agreement", gap, TOL["pipeline_agreement"], t0)]


CHECKS = {
    "closure": check_closure,
    "branches": check_branches,
    "rates": check_rates,
    "aggregation": check_aggregation,
    "normal_forces": check_normal_forces,
}


def validate(model, stages=STAGES):
    """Run the selected stages; returns the list of :class:`Check` results."""
    out = []
    for stage in stages:
        out.extend(CHECKS[stage](model))
    return out
