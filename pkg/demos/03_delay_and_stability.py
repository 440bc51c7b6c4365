"""
Force feedback under transport delay
=====================================

Without delay the coupled operator/avatar system only loses energy. As the
one-way link delay grows the feedback loop eventually injects energy faster
than the dampers remove it. This script finds where that happens for the
default gains on the bundled 10 s circle trace.
"""

import numpy as np

from telelink.config import bundled_path, default_config
from telelink.session import coupled_energy, load_trace, stability_sweep

cfg = default_config()

# zero delay: total energy of a perturbed operator/avatar pair
energy = coupled_energy(cfg, duration=5.0)
print(f"zero delay: energy {energy[0]:.3f} J -> {energy[-1]:.1e} J, "
      f"largest per-step rise {np.max(np.diff(energy)):.1e} J")

# %%
trace = load_trace(bundled_path("traces/circle_10s.csv"))
res = stability_sweep(cfg, trace, [0.0, 0.01, 0.02, 0.03, 0.05], seed=0)
for p in res.points:
    print(f"  delay {p.delay * 1e3:4.0f} ms  peak energy {p.max_energy:10.3f} J  "
          f"{'diverged' if p.diverged else 'stable'}")
lo, hi = res.threshold()
print(f"instability sets in between {lo * 1e3:.0f} and {hi * 1e3:.0f} ms one-way delay")
