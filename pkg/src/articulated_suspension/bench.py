"""Microbenchmarks of the compiled kernels.

Each row times one operation on a fixed representative state. Calls are
grouped into blocks; the mean is over all calls and the spread is the
standard deviation of the per-call time across blocks. Every kernel is
called once before timing so that compilation is excluded.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import spatial as sp
from .dynamics import _aggregate
from .model import _backward_pass, _body_wrenches, _poses, _project_wrenches, _propagate
from .pipeline import ForcePipeline, _coordinates, _forces_at

#: Published per-call times (microseconds) of the same five operations.
REFERENCE_US = {
    "forward_kinematics": 0.47,
    "manipulator_wrench": 2.7,
    "arm_inverse_dynamics": 2.8,
    "inertia_extraction": 5.2,
    "normal_forces": 10.0,
}

ROWS = tuple(REFERENCE_US)


@dataclass(frozen=True)
class BenchRow:
    name: str
    calls: int
    mean_us: float
    std_us: float
    reference_us: float

    def to_dict(self):
        return dict(self.__dict__)


def time_call(fn, calls=100_000, block=1000):
    """Mean and block standard deviation of one call to ``fn``, in microseconds."""
    fn()
    n_blocks = max(1, -(-calls // block))
    per = np.empty(n_blocks)
    clock = time.perf_counter
    for b in range(n_blocks):
        t0 = clock()
        for _ in range(block):
            fn()
        per[b] = (clock() - t0) / block
    per *= 1e6
    return float(per.mean()), float(per.std(ddof=1) if n_blocks > 1 else 0.0), n_blocks * block


def _operations(model):
    pipe = ForcePipeline(model)
    m = model
    x = np.array(m.x_nominal, dtype=float)
    xd = np.array([0.02, -0.01])
    xdd = np.array([0.1, 0.05])
    rng = np.random.default_rng(0)
    packed = pipe.pack(rng.uniform(-1, 1, m.n_arm), rng.uniform(-1, 1, m.n_arm),
                       rng.uniform(-1, 1, m.n_arm), np.zeros(4), np.full(4, 0.5))
    q, qd, qdd = _coordinates(*pipe._layout, x, xd, xdd, *packed)
    tree = (m.parent, m.kind, m.screw, m.offset, m.coord)
    ra = pipe.root_acc
    fb, m_idx = m.frame("fb"), m.frame("m")
    ones = np.ones(m.body_frame.shape[0], dtype=np.bool_)
    T_world = _poses(*tree, q)
    T_target = T_world[fb]

    def fk():
        q, _, _ = _coordinates(*pipe._layout, x, xd, xdd, *packed)
        return _poses(*tree, q)

    def wrench():
        T, _, nu, acc = _propagate(*tree, q, qd, qdd, ra)
        F = _body_wrenches(m.body_frame, m.body_inertia, nu, acc)
        return _project_wrenches(T, m_idx, m.body_frame, F, pipe.man_mask)

    def inverse_dynamics():
        _, T_local, nu, acc = _propagate(*tree, q, qd, qdd, ra)
        F = _body_wrenches(m.body_frame, m.body_inertia, nu, acc)
        return _backward_pass(m.parent, m.kind, m.screw, m.coord, T_local, m.body_frame, F,
                              m.n_coords)

    def inertia():
        return sp.extract_inertia(_aggregate(T_world, T_target, m.body_frame,
                                             m.body_inertia, ones))

    def forces():
        return _forces_at(*pipe._layout, x, xd, xdd, *packed, *pipe._static,
                          pipe._no_freeze, False)

    return dict(zip(ROWS, (fk, wrench, inverse_dynamics, inertia, forces)))


def benchmark(model, calls=100_000, block=1000, rows=ROWS):
    """Time the selected operations; returns a list of :class:`BenchRow`."""
    ops = _operations(model)
    out = []
    for name in rows:
        mean, std, n = time_call(ops[name], calls, block)
        out.append(BenchRow(name, n, mean, std, REFERENCE_US[name]))
    return out


def format_report(rows):
    lines = [f"{'operation':<22}{'calls':>9}{'mean us':>11}{'std us':>10}{'ref us':>9}"]
    for r in rows:
        lines.append(f"{r.name:<22}{r.calls:>9d}{r.mean_us:>11.3f}{r.std_us:>10.3f}"
                     f"{r.reference_us:>9.2f}")
    return "\n".join(lines)
