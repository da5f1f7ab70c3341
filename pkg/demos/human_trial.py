"""A short human trial: how much the laser on the follower helps the filter.

Both filters see the same run. FULL fuses the driver encoder and a laser on
the follower; PARTIAL only has the encoder and must infer the follower from
the coupling model. Run with ``python3 demos/human_trial.py [seconds]``.
"""

import sys

import numpy as np

from magcouple.harness.config import from_mapping
from magcouple.harness.scenarios import run_scenario

seconds = float(sys.argv[1]) if len(sys.argv) > 1 else 60.0

# %% Run both modes on one simulated session
cfg = from_mapping({"scenario": "human", "duration": seconds, "seed": 0})
result = run_scenario(cfg)
s = result.summary
print(f"{seconds:.0f} s session, driver travelled {s['bottom_travel_m']:.2f} m, "
      f"largest offset {1000 * s['max_offset_m']:.1f} mm, {s['interrupter_events']} interrupter kicks")

# %% Position RMSE
for mode, row in s["rmse_cm"].items():
    print(f"{mode:8s} bottom {row['bottom_cm']:.4f} cm   top {row['top_cm']:.4f} cm")

# %% Where PARTIAL loses track
# The follower estimate in PARTIAL mode is only as good as the coupling model,
# so its error follows the unmodeled hand force on the armrest.
full, partial = result.logs["human_full.csv"], result.logs["human_partial.csv"]
err_full = np.array([r.xh2 - r.x2 for r in full])
err_partial = np.array([r.xh2 - r.x2 for r in partial])
offset = np.array([r.offset for r in full])
print(f"follower error std: FULL {1000 * err_full.std():.2f} mm, PARTIAL {1000 * err_partial.std():.2f} mm")
print(f"correlation of PARTIAL error with true offset: {np.corrcoef(err_partial, offset)[0, 1]:+.2f}")
