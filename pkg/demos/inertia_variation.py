"""How the platform mass distribution moves with the suspension, and what freezing it costs."""

import numpy as np

from articulated_suspension.dynamics import aggregate_inertia
from articulated_suspension.model import flat_ground_state, load_model
from articulated_suspension.sim import frozen_inertia_gap, reference_scenario

model = load_model()
print(f"{'x':>8}{'com x':>9}{'com z':>9}{'Ixx':>9}{'Iyy':>9}{'Izz':>9}")
for x in np.linspace(model.x_min[0], model.x_max[0], 6):
    a = aggregate_inertia(model, flat_ground_state(model, [x, x]))
    print(f"{x:8.3f}{a.com[0]:9.4f}{a.com[2]:9.4f}" + "".join(f"{v:9.0f}" for v in np.diag(a.inertia)))

# the mass is invariant; the CoM and tensor are not, so a rigid-body model drifts
sc = reference_scenario(mode="scripted")
print("\nRMS normal-force gap, variable vs frozen inertia (20 s of the scripted commands)")
for amp in (0.0, 0.03, 0.05, 0.07):
    print(f"  amplitude {amp:.2f} m: {frozen_inertia_gap(sc, amp, model, duration=20.0):8.1f} N")
