"""Stroke sweep of one suspension triangle: inner angles, closure and rate coefficients."""

import numpy as np

from articulated_suspension import chain as ch
from articulated_suspension.model import load_model

model = load_model()
g = model.chains["R"]
lo, hi = g.stroke_limits()
print(f"admissible stroke [{lo:.4f}, {hi:.4f}] m, operating range "
      f"[{model.x_min[0]:.3f}, {model.x_max[0]:.3f}] m\n")
print(f"{'x':>8}{'q':>10}{'q1':>10}{'q2':>10}{'k1':>10}{'k2':>10}{'k3':>10}{'closure':>11}")
for x in np.linspace(model.x_min[0], model.x_max[0], 9):
    q = np.degrees(ch.inner_angles(g, x))
    k = ch.rate_coefficients(g, x, 0.0)[:3]
    closure = abs(np.radians(q).sum() + np.pi)
    print(f"{x:8.3f}" + "".join(f"{v:10.2f}" for v in q) + "".join(f"{v:10.3f}" for v in k)
          + f"{closure:11.1e}")
