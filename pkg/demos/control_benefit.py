"""Fixed versus optimised suspension over a shortened reference run.

The full 100 s comparison takes a few minutes; pass a duration to change it:
``python3 control_benefit.py 100``.
"""

import sys

from articulated_suspension.sim import reference_scenario, run_scenario

duration = float(sys.argv[1]) if len(sys.argv) > 1 else 20.0
fixed = run_scenario(reference_scenario(mode="fixed", duration=duration)).summary
opt = run_scenario(reference_scenario(duration=duration)).summary

for key in ("rms_force_metric", "rms_com_x", "min_normal_force"):
    print(f"{key:<18}{fixed[key]:12.4g}{opt[key]:12.4g}   ratio {opt[key] / fixed[key]:.3f}")
o = opt["optimizer"]
print(f"\n{o['solves']} solves, {o['mean_iterations']:.2f} iterations on average, "
      f"max KKT residual {o['max_kkt']:.1e}")
