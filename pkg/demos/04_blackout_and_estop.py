"""
Losing the link, and stopping hard
===================================

A 200 ms communication blackout makes the avatar hold its pose; once
commands come back it fades smoothly onto the live target. An emergency
stop, by contrast, is final.
"""

import numpy as np

from telelink.config import default_config
from telelink.session import Session, generate_trace, latency_budget

cfg = default_config()

s = Session(cfg, generate_trace("circle", 3.0, cfg), seed=0)
s.add_blackout(1.0, 1.2)
log = s.run()
for t, mode in s.safety.history:
    print(f"t = {t:.3f} s  -> {mode.name.lower()}")
held = np.array(log.modes) == "holding"
palms = log.columns_like("palm_")[held]
print(f"held for {held.sum()} ticks, palm drift {np.max(np.abs(palms - palms[0])):.1e} m")

b = latency_budget(log)
print(f"glass-to-glass {b.total * 1e3:.2f} ms: exposure {b.exposure * 1e3:.1f}, encode {b.encode * 1e3:.1f}, "
      f"transmit {b.transmit * 1e3:.2f}, decode {b.decode * 1e3:.1f}")

# %%
# Drive the base forward, then hit the stop at 1.5 s.
s = Session(cfg, generate_trace("locomote", 2.5, cfg), seed=0)
s.schedule_estop(1.5)
log = s.run()
after = log["t"] >= 1.5
print(f"base travelled {log['base_x'][after][0]:.3f} m before the stop")
print("after the stop: max |torque|", np.abs(log.columns_like("tau_")[after]).max(),
      " max |wheel rate|", np.abs(log.columns_like("wheel_")[after]).max())
