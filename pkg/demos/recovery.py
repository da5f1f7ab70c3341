"""A patient grips the armrest hard. Does the driver keep the follower?

The pulse holds the follower with twice the peak coupling force for six
seconds. Without recovery the driver walks away and the magnets part; with
it the driver backs up whenever the estimated offset passes half the
peak-force offset. Run with ``python3 demos/recovery.py``.
"""

import numpy as np

from magcouple.harness.config import from_mapping
from magcouple.harness.scenarios import run_scenario

result = run_scenario(from_mapping({"scenario": "recovery", "mode": "full"}))
s = result.summary
print(f"pulse {s['pulse_resistance_N']:.1f} N from {s['pulse_start_s']} s to {s['pulse_end_s']} s; "
      f"threshold {1000 * s['threshold_m']:.1f} mm, detachment past {1000 * s['peak_offset_m']:.1f} mm")

# %% Offset over time, once per second
on, off = result.logs["recovery_on_full.csv"], result.logs["recovery_off_full.csv"]
print("   t    ON (mm)   OFF (mm)")
for a, b in zip(on[::100], off[::100]):
    print(f"{a.t:5.1f}  {1000 * a.offset:8.1f}  {1000 * b.offset:8.1f}  {'R' if a.recovery else ''}")

# %% Outcome
for label in ("on", "off"):
    row = s[label]
    print(f"recovery {label:3s}: max {1000 * row['max_offset_m']:.1f} mm, ends {row['final_state']}, "
          f"{row['recovery_steps']} control steps in recovery")
busy = np.mean([r.recovery for r in on])
print(f"recovery was active {100 * busy:.0f}% of the time")
