"""Walk through the lateral coupling force and what the calibration does to it.

Run with ``python3 demos/coupling_force.py``.
"""

import numpy as np

from magcouple.physics import (PhysicalParams, calibrate_coupling, lateral_magnetic_force, peak_force,
                               peak_offset)

G = 9.81

# %% The raw coupling constant
# mu0*M^2/2 is the textbook value. With the default geometry it predicts a
# holding force far above what the rig actually holds.
raw = PhysicalParams()
print(f"raw Kd = {raw.coupling_Kd:.4g}, peak force {peak_force(raw):.1f} N "
      f"({peak_force(raw) / G:.1f} kg)")

# %% Calibrated
# Scale Kd so the peak force holds 1.45 kg, between the last held (1.0 kg)
# and the complete detachment (1.7 kg) weights.
params = calibrate_coupling(raw, 1.45)
print(f"calibrated Kd = {params.coupling_Kd:.4g}, peak force {peak_force(params):.2f} N "
      f"at an offset of {1000 * peak_offset(params):.1f} mm")

# %% Force against offset
# The force pulls the follower back toward the driver, peaks, then fades to
# zero once the magnets no longer overlap enough to hold.
offsets = np.linspace(0.0, 0.14, 15)
force = lateral_magnetic_force(offsets, 0.0, params)
for x, f in zip(offsets, force):
    bar = "#" * int(round(abs(f)))
    print(f"{1000 * x:6.1f} mm {f:8.3f} N {bar}")

# %% Stiffness near zero offset
h = 1e-6
k = (lateral_magnetic_force(h, 0.0, params) - lateral_magnetic_force(-h, 0.0, params)) / (2 * h)
print(f"small-offset stiffness {k:.0f} N/m; a linear spring would put a 1 kg load "
      f"{1000 * G / k:.0f} mm off, the real curve softens so it sits a little further")
