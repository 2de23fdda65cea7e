"""Scenario scripting, the fixed-step simulation loop and its metrics.

A scenario drives the arm with ``q = q_alpha + q_beta sin(t)``, the wheels
with constant rates, and the suspension in one of three ways:

* ``fixed``: held at ``fixed_x``;
* ``scripted``: ``x = x_alpha + x_beta sin(f_s t)``;
* ``optimized``: chosen step by step by :func:`optimizer.solve_step`.

With ``loop = "ideal"`` the mechanics see the decided state directly. With
``loop = "hydraulic"`` the decided positions become references for the
valve-controlled cylinders of :mod:`hydraulics`, and the mechanics see the
positions the cylinders actually reach. In that mode the optimizer keeps
running on its own ideal state, so the hydraulics only track its output.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ContractViolation, SimulationError, SuspensionError
from .hydraulics import HydraulicParams, TrackingLoop
from .model import WHEELS, load_model, wheel_motion
from .optimizer import (PAIRS, BoundParams, Commands, OptProblem, default_angle_weights,
                        default_pair_weights, solve_step, with_state)
from .pipeline import ForcePipeline

log = logging.getLogger(__name__)

MODES = ("fixed", "scripted", "optimized")
LOOPS = ("ideal", "hydraulic")

#: Column order of the metrics CSV.
COLUMNS = (
    ("t",)
    + tuple(f"f_{w}" for w in WHEELS)
    + ("force_metric", "com_x", "x_R", "x_L", "xd_R", "xd_L", "xdd_R", "xdd_L", "x_r_R", "x_r_L")
    + tuple(f"{c}_{s}" for s in ("R", "L") for c in ("p_a", "p_b", "u", "f_p", "err"))
)


def _vec(v, n=None):
    a = np.array(v, dtype=float)
    if n is not None and a.shape != (n,):
        raise ContractViolation(f"expected {n} values, got {a.shape}")
    return a


@dataclass(frozen=True)
class CommandSpec:
    """Sinusoidal arm and suspension commands and constant wheel rates."""

    q_alpha: tuple = (np.pi / 2, 0.5, -0.5, 0.1, 0.0, np.pi / 2, 0.0)
    q_beta: tuple = (4 * np.pi, 0.7, -0.4, 0.9, 0.0, 0.0, 0.0)
    wheel_rates: tuple = (np.pi / 5, np.pi / 10, np.pi / 5, np.pi / 10)
    x_alpha: tuple = (-0.1, -0.1)
    x_beta: tuple = (0.07, 0.07)
    f_s: float = 0.3

    def __post_init__(self):
        if len(self.q_alpha) != len(self.q_beta):
            raise ContractViolation("q_alpha and q_beta differ in length")
        for name, n in (("wheel_rates", 4), ("x_alpha", 2), ("x_beta", 2)):
            _vec(getattr(self, name), n)


@dataclass(frozen=True)
class OptimizerConfig:
    front_rear_weight: float = 1.0
    lateral_weight: float = 1e-3
    angle_front_rear: float = 100.0
    angle_lateral: float = 10.0
    bounds: BoundParams = BoundParams()
    #: Prediction interval of the cost (s); ``None`` means the step ``dt``.
    horizon: float = None
    max_iter: int = 25

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        if "bounds" in d:
            d["bounds"] = BoundParams(**d["bounds"])
        return cls(**d)


@dataclass(frozen=True)
class HydraulicConfig:
    params: HydraulicParams = HydraulicParams()
    k_p: float = 10.0
    damping: float = 3e4

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        if "params" in d:
            d["params"] = HydraulicParams.from_dict(d["params"])
        return cls(**d)


@dataclass(frozen=True)
class Scenario:
    duration: float = 100.0
    dt: float = 1e-3
    mode: str = "fixed"
    loop: str = "ideal"
    symmetric: bool = True
    fixed_x: tuple = None
    commands: CommandSpec = CommandSpec()
    optimizer: OptimizerConfig = OptimizerConfig()
    hydraulics: HydraulicConfig = HydraulicConfig()
    model: str = None
    name: str = "scenario"
    output_dir: str = "."
    csv: str = "metrics.csv"
    summary: str = "summary.json"
    #: Sampling period of the progress log (s of simulated time).
    log_every: float = 10.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ContractViolation("dt must be positive")
        if not self.duration >= self.dt:
            raise ContractViolation("duration must be at least dt")
        if self.mode not in MODES:
            raise ContractViolation(f"mode must be one of {MODES}")
        if self.loop not in LOOPS:
            raise ContractViolation(f"loop must be one of {LOOPS}")

    @property
    def steps(self):
        return int(round(self.duration / self.dt))

    @property
    def hold(self):
        return _vec(self.commands.x_alpha if self.fixed_x is None else self.fixed_x, 2)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("note", None)
        if "commands" in d:
            d["commands"] = CommandSpec(**{k: (tuple(v) if isinstance(v, list) else v)
                                           for k, v in d["commands"].items()})
        d["optimizer"] = OptimizerConfig.from_dict(d.get("optimizer"))
        d["hydraulics"] = HydraulicConfig.from_dict(d.get("hydraulics"))
        if d.get("fixed_x") is not None:
            d["fixed_x"] = tuple(d["fixed_x"])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractViolation(f"unknown scenario keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        path = Path(path)
        sc = cls.from_dict(json.loads(path.read_text()))
        if sc.model is not None and not Path(sc.model).is_absolute():
            sc = replace(sc, model=str(path.parent / sc.model))
        return sc

    def to_dict(self):
        return json.loads(json.dumps(asdict(self), default=float))


def reference_scenario(**kw):
    """The bundled reference scenario, with fields overridden by ``kw``."""
    text = resources.files("articulated_suspension.data").joinpath(
        "reference_scenario.json").read_text()
    return replace(Scenario.from_dict(json.loads(text)), **kw)


@dataclass(frozen=True)
class StepCommands:
    """Everything scripted at one instant."""

    q_arm: np.ndarray
    qd_arm: np.ndarray
    qdd_arm: np.ndarray
    q_w: np.ndarray
    qd_w: np.ndarray
    qdd_w: np.ndarray
    chassis: np.ndarray
    x: np.ndarray
    xd: np.ndarray
    xdd: np.ndarray

    def for_optimizer(self):
        return Commands(self.q_arm, self.qd_arm, self.qdd_arm, self.q_w, self.qd_w,
                        self.qdd_w, self.chassis)


def chassis_path(v, w, t):
    """Chassis state ``[x, y, yaw, speed, yaw_rate, accel, yaw_accel]`` on a circle."""
    if abs(w) < 1e-12:
        return np.array([v * t, 0.0, 0.0, v, 0.0, 0.0, 0.0])
    return np.array([v / w * np.sin(w * t), v / w * (1.0 - np.cos(w * t)), w * t, v, w, 0.0, 0.0])


class CommandGenerator:
    """Commands of a scenario as a function of time, with constants precomputed."""

    def __init__(self, scenario, model):
        c = scenario.commands
        self.qa, self.qb = _vec(c.q_alpha), _vec(c.q_beta)
        self.rates = _vec(c.wheel_rates, 4)
        self.xa, self.xb, self.f = _vec(c.x_alpha, 2), _vec(c.x_beta, 2), float(c.f_s)
        self.v, self.w = wheel_motion(model, self.rates)
        self._zero_w = np.zeros(4)

    def __call__(self, t):
        s, co = np.sin(t), np.cos(t)
        qb, xb, f = self.qb, self.xb, self.f
        sf, cf = np.sin(f * t), np.cos(f * t)
        return StepCommands(
            self.qa + qb * s, qb * co, -qb * s,
            self.rates * t, self.rates, self._zero_w, chassis_path(self.v, self.w, t),
            self.xa + xb * sf, xb * (f * cf), xb * (-f * f * sf),
        )


def command_generators(scenario, t, model):
    """Arm, wheel, chassis and scripted suspension commands at time ``t``.

    The suspension entry is the scripted sinusoid whatever the mode;
    fixed and optimized runs ignore it. Loops should build one
    :class:`CommandGenerator` instead of calling this per step.
    """
    return CommandGenerator(scenario, model)(t)


def force_distribution_metric(forces):
    """Sum of ``|f_i - f_j|`` over the six unordered wheel pairs (last axis)."""
    f = np.asarray(forces, dtype=float)
    return sum(np.abs(f[..., i] - f[..., j]) for i, j in PAIRS)


def rms(a):
    a = np.asarray(a, dtype=float)
    return float(np.sqrt(np.mean(a * a)))


@dataclass
class SimResult:
    scenario: Scenario
    table: np.ndarray
    summary: dict
    solutions: list = field(default_factory=list)

    def column(self, name):
        return self.table[:, COLUMNS.index(name)]

    def write_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, self.table, delimiter=",", header=",".join(COLUMNS),
                   comments="", fmt="%.17g")
        return path

    def write_summary(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")
        return path


class _Stage:
    """Tags module errors raised inside the loop with the stage and time."""

    def __init__(self):
        self.name, self.t = "setup", 0.0

    def __call__(self, name, t):
        self.name, self.t = name, t
        return self

    def __enter__(self):
        return self

    def __exit__(self, typ, exc, tb):
        if isinstance(exc, SuspensionError) and not isinstance(exc, SimulationError):
            raise SimulationError(self.name, self.t, exc) from exc
        return False


def _optimizer_problem(scenario, pipe, model, x, xd, xdd, cmd):
    oc = scenario.optimizer
    return OptProblem(
        pipe, x, xd, xdd, scenario.dt, cmd.for_optimizer(), model.x_min, model.x_max,
        pair_weights=default_pair_weights(oc.front_rear_weight, oc.lateral_weight),
        angle_weights=default_angle_weights(oc.angle_front_rear, oc.angle_lateral),
        bounds=oc.bounds, symmetric=scenario.symmetric, horizon=oc.horizon)


def run_scenario(scenario, model=None, keep_solutions=False):
    """Run ``scenario`` and return the per-step table and summary.

    Rows are written for ``t = 0, dt, ..., duration``; see :data:`COLUMNS`.
    Module errors abort the run as :class:`SimulationError` naming the stage
    and time.
    """
    sc = scenario
    stage = _Stage()
    with stage("setup", 0.0):
        model = model if model is not None else load_model(sc.model)
        pipe = ForcePipeline(model)
    dt, n = sc.dt, sc.steps
    horizon = sc.optimizer.horizon if sc.optimizer.horizon is not None else dt
    hyd = sc.loop == "hydraulic"

    cmd_at = CommandGenerator(sc, model)

    c0 = cmd_at(0.0)
    if sc.mode == "fixed":
        xi, xdi, xddi = sc.hold, np.zeros(2), np.zeros(2)
    elif sc.mode == "scripted":
        xi, xdi, xddi = c0.x, c0.xd, c0.xdd
    else:
        xi, xdi, xddi = _vec(sc.commands.x_alpha, 2), np.zeros(2), np.zeros(2)
    if sc.symmetric and sc.mode == "optimized" and xi[0] != xi[1]:
        raise ContractViolation("symmetric optimisation needs equal initial positions")

    tracker = None
    if hyd:
        hc = sc.hydraulics
        tracker = TrackingLoop(hc.params, xi, xdi, k_p=hc.k_p, damping=hc.damping)
        with stage("hydraulics", 0.0):
            _, tau = pipe.actuator_dynamics(xi, xdi, c0.q_arm, c0.qd_arm, c0.qdd_arm,
                                            c0.q_w, c0.qd_w, c0.qdd_w, c0.chassis)
            tracker.equilibrate(tau)

    problem = None
    if sc.mode == "optimized":
        problem = _optimizer_problem(sc, pipe, model, xi, xdi, xddi, cmd_at(horizon - dt))

    table = np.full((n + 1, len(COLUMNS)), np.nan)
    solutions, statuses = [], {}
    iters, evals, kkts, consist = [], [], [], []
    warm = None
    t_wall = time.perf_counter()
    next_log = sc.log_every
    for k in range(n + 1):
        t = k * dt
        c = cmd_at(t)
        if k > 0:
            if sc.mode == "scripted":
                xi, xdi, xddi = c.x, c.xd, c.xdd
            elif sc.mode == "optimized":
                with stage("optimizer", t):
                    prob = with_state(problem, xi, xdi, xddi,
                                      cmd_at(t - dt + horizon).for_optimizer(), warm)
                    sol = solve_step(prob, max_iter=sc.optimizer.max_iter)
                xi, xdi, xddi = sol.x, sol.xd, sol.xdd
                warm = sol.xdd[:prob.n]
                statuses[sol.status] = statuses.get(sol.status, 0) + 1
                iters.append(sol.iterations)
                evals.append(sol.evaluations)
                kkts.append(sol.kkt)
                consist.append(max(sol.residuals.values()))
                if keep_solutions:
                    solutions.append(sol)
        if hyd:
            if k > 0:
                with stage("hydraulics", t):
                    xa, xda = tracker.x, tracker.xd
                    H, tau = pipe.actuator_dynamics(xa, xda, c.q_arm, c.qd_arm, c.qdd_arm,
                                                    c.q_w, c.qd_w, c.qdd_w, c.chassis)
                    xdda = tracker.step(xi, H, tau, dt)
            else:
                xdda = np.zeros(2)
            x, xd, xdd = tracker.x.copy(), tracker.xd.copy(), xdda
        else:
            x, xd, xdd = xi, xdi, xddi
        with stage("forces", t):
            r = pipe(x, xd, xdd, c.q_arm, c.qd_arm, c.qdd_arm, c.q_w, c.qd_w, c.qdd_w,
                     c.chassis, check_wheelbase=False)
        row = table[k]
        row[0] = t
        row[1:5] = r.forces
        row[5] = force_distribution_metric(r.forces)
        row[6] = r.com[0]
        row[7:9], row[9:11], row[11:13], row[13:15] = x, xd, xdd, xi
        if hyd:
            for j, s in enumerate(tracker.states):
                f_p = tracker.params.A_a * s.p_a - tracker.params.A_b * s.p_b
                row[15 + 5 * j:20 + 5 * j] = (s.p_a, s.p_b, s.u, f_p, xi[j] - x[j])
        else:
            row[19], row[24] = 0.0, 0.0
        if t >= next_log:
            log.info("%s t=%.1f s metric=%.4g com_x=%.4g x=%s", sc.name, t, row[5], row[6], x)
            next_log += sc.log_every
    wall = time.perf_counter() - t_wall

    err = np.abs(table[:, [19, 24]])
    tail = err[-max(1, len(err) // 10):]
    summary = {
        "name": sc.name,
        "mode": sc.mode,
        "loop": sc.loop,
        "duration": sc.duration,
        "dt": dt,
        "steps": n,
        "rms_force_metric": rms(table[:, 5]),
        "rms_com_x": rms(table[:, 6]),
        "mean_force_metric": float(np.mean(table[:, 5])),
        "min_normal_force": float(np.min(table[:, 1:5])),
        "max_tracking_error": float(np.max(err)),
        "final_tracking_error": float(np.max(tail)),
        "wall_time_s": wall,
    }
    if hyd:
        summary["pressure_clamps"] = tracker.clamps
    if sc.mode == "optimized":
        summary["optimizer"] = {
            "horizon": horizon,
            "solves": len(iters),
            "status_counts": statuses,
            "mean_iterations": float(np.mean(iters)) if iters else 0.0,
            "max_iterations": int(np.max(iters)) if iters else 0,
            "mean_evaluations": float(np.mean(evals)) if evals else 0.0,
            "max_kkt": float(np.max(kkts)) if kkts else 0.0,
            "max_consistency_residual": float(np.max(consist)) if consist else 0.0,
        }
    return SimResult(sc, table, summary, solutions)


def run_and_write(scenario, output_dir=None, csv=None, summary=None, model=None):
    """:func:`run_scenario` plus the CSV and JSON summary files."""
    res = run_scenario(scenario, model)
    out = Path(output_dir if output_dir is not None else scenario.output_dir)
    res.write_csv(out / (csv or scenario.csv))
    res.write_summary(out / (summary or scenario.summary))
    return res


def inertia_comparison(scenario, amplitudes, model=None):
    """RMS gap between variable- and frozen-inertia forces per suspension amplitude.

    Each amplitude replaces ``x_beta`` of a scripted, ideal run. The frozen
    solution holds the platform inertia at its value for ``x_alpha``; the
    RMS is taken over all wheels and steps.
    """
    model = model if model is not None else load_model(scenario.model)
    pipe = ForcePipeline(model)
    c = scenario.commands
    M0 = pipe.platform_inertia(_vec(c.x_alpha, 2))
    out = []
    for a in amplitudes:
        cs = replace(c, x_beta=(float(a), float(a)))
        sc = replace(scenario, commands=cs, mode="scripted", loop="ideal")
        diff = np.empty((sc.steps + 1, 4))
        gen = CommandGenerator(sc, model)
        for k in range(sc.steps + 1):
            s = gen(k * sc.dt)
            args = (s.q_arm, s.qd_arm, s.qdd_arm, s.q_w, s.qd_w, s.qdd_w, s.chassis)
            var = pipe(s.x, s.xd, s.xdd, *args, check_wheelbase=False).forces
            frz = pipe.frozen(s.x, s.xd, s.xdd, M0, *args).forces
            diff[k] = var - frz
        out.append({"amplitude": float(a), "rms_difference": rms(diff),
                    "max_difference": float(np.max(np.abs(diff)))})
    return out


def frozen_inertia_gap(scenario, amplitude, model=None, duration=None, sample=0.01):
    """RMS difference of the normal forces with variable and frozen platform inertia.

    The suspension follows the scripted sinusoid with amplitude
    ``amplitude`` (m) about ``x_alpha``; everything else follows the
    scenario commands. The frozen solution holds the platform inertia at
    its value at ``x_alpha``. Returns the RMS over time of the largest
    per-wheel difference (N).
    """
    model = model if model is not None else load_model(scenario.model)
    pipe = ForcePipeline(model)
    c = scenario.commands
    sc = replace(scenario, commands=replace(c, x_beta=(amplitude, amplitude)))
    gen = CommandGenerator(sc, model)
    c0 = gen(0.0)
    M0 = pipe.platform_inertia(gen.xa, c0.q_arm, c0.q_w, c0.chassis)
    T = sc.duration if duration is None else duration
    gaps = []
    for t in np.arange(0.0, T + 0.5 * sample, sample):
        k = gen(t)
        args = (k.q_arm, k.qd_arm, k.qdd_arm, k.q_w, k.qd_w, k.qdd_w, k.chassis)
        a = pipe(k.x, k.xd, k.xdd, *args, check_wheelbase=False).forces
        b = pipe.frozen(k.x, k.xd, k.xdd, M0, *args).forces
        gaps.append(np.abs(a - b).max())
    return rms(gaps)
