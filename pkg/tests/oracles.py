"""Independent reference computations shared by the unit and acceptance tests."""

import itertools

import numpy as np

from articulated_suspension import spatial as sp

from articulated_suspension.optimizer import OptProblem, evaluate_cost
from articulated_suspension.sim import CommandGenerator, OptimizerConfig, reference_scenario


def grid_oracle(problem, points=401, levels=3):
    """Exhaustive grid minimum of the reduced cost, refined around the best cell.

    Each level spans two cells of the previous one around its best point, so
    after ``levels`` passes the spacing is ``width / (points / 2) ** levels``
    per axis. Returns ``(cost, z, spacing in predicted x)``.
    """
    lo, hi, _ = problem.interval()
    n = problem.n
    k = points if n == 1 else int(np.sqrt(points))
    h2 = problem.horizon ** 2
    best_c, best_z = np.inf, None
    a, b = lo.copy(), hi.copy()
    for _ in range(levels):
        axes = [np.linspace(a[i], b[i], k) for i in range(n)]
        step = np.array([ax[1] - ax[0] if k > 1 else 0.0 for ax in axes])
        for z in itertools.product(*axes):
            z = np.array(z)
            c = evaluate_cost(problem, problem.predict(z))
            if c < best_c:
                best_c, best_z = c, z
        a = np.maximum(best_z - step, lo)
        b = np.minimum(best_z + step, hi)
    return best_c, best_z, float(np.max(step) * h2)


def snapshot(pipe, model, rng, symmetric, horizon, dt=1e-3):
    """A random but admissible optimizer problem built from the reference commands."""
    sc = reference_scenario()
    gen = CommandGenerator(sc, model)
    t = rng.uniform(0, 100)
    x = rng.uniform(-0.18, -0.02)
    x_k = np.full(2, x) if symmetric else np.array([x, x + rng.uniform(-0.015, 0.015)])
    xd = rng.uniform(-0.02, 0.02)
    xd_k = np.full(2, xd) if symmetric else xd + rng.uniform(-0.005, 0.005, 2)
    oc = OptimizerConfig()
    h = dt if horizon is None else horizon
    return OptProblem(pipe, x_k, xd_k, rng.uniform(-0.3, 0.3, 2), dt,
                      gen(t + h).for_optimizer(), model.x_min, model.x_max,
                      bounds=oc.bounds, symmetric=symmetric, horizon=horizon)


def particles(M):
    """Six point masses with the mass, CoM and central tensor of ``M``."""
    m, r, I = sp.extract_inertia(M)
    lam, V = np.linalg.eigh(I)
    sec = 0.5 * lam.sum() - lam  # second moments along the principal axes
    pts, w = [], []
    for k in range(3):
        a = np.sqrt(3.0 * max(sec[k], 0.0) / m)
        for s in (1, -1):
            pts.append(r + s * a * V[:, k])
            w.append(m / 6)
    return np.array(pts), np.array(w)


def cloud_moments(points, masses):
    m = masses.sum()
    c = masses @ points / m
    I = sum(mi * (p @ p * np.eye(3) - np.outer(p, p)) for p, mi in zip(points, masses))
    return m, c, I


def force_oracle(inp):
    """Minimum-norm vertical forces from the balance assembled with cross products.

    The ground supplies vertical forces at the contacts plus an unknown
    horizontal force in the ground plane, which is fixed by the horizontal
    balance; the remaining vertical force and tilting moments give three
    equations in four unknowns.
    """
    W = inp.contact_wrench()
    c = inp.contacts
    ground = np.array([0.0, 0.0, c[:, 2].mean()])
    tangential = np.array([W[0], W[1], 0.0])
    rows = [np.ones(4)]
    for axis in (0, 1):
        rows.append([np.cross(p, [0, 0, 1.0])[axis] for p in c])
    A = np.array(rows)
    b = np.array([W[2], *(W[3:5] - np.cross(ground, tangential)[:2])])
    return np.linalg.lstsq(A, b, rcond=None)[0], A, b
