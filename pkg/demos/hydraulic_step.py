"""A 0.05 m extension step of both cylinders under proportional position control."""

import numpy as np

from articulated_suspension.hydraulics import HydraulicParams, TrackingLoop
from articulated_suspension.model import load_model
from articulated_suspension.pipeline import ForcePipeline

pipe = ForcePipeline(load_model())
q_arm = np.r_[np.pi / 2, 0.5, -0.5, 0.1, 0.0, np.pi / 2, 0.0]
x0 = np.array([-0.1, -0.1])
target = x0 + 0.05

loop = TrackingLoop(HydraulicParams(), x0, k_p=10.0)
loop.equilibrate(pipe.actuator_dynamics(x0, np.zeros(2), q_arm)[1])
print(f"{'t':>5}{'error mm':>10}{'p_a MPa':>9}{'p_b MPa':>9}{'u':>8}")
for k in range(1, 5001):
    H, tau = pipe.actuator_dynamics(loop.x, loop.xd, q_arm)
    loop.step(target, H, tau, 1e-3)
    if k % 500 == 0:
        s = loop.states[0]
        print(f"{k * 1e-3:5.1f}{(target - loop.x)[0] * 1e3:10.3f}{s.p_a / 1e6:9.2f}"
              f"{s.p_b / 1e6:9.2f}{s.u:8.3f}")
print(f"pressure clamps: {loop.clamps}")
