"""Magnetostatic coupling force and friction laws for the driver/follower pair.

All force functions accept scalars or numpy arrays. Positions are along the
travel axis in metres; the offset ``p1 - p2`` is positive when the bottom
(driver) magnet is ahead of the top (follower) magnet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy import optimize

from . import _kernels

MU0 = 4e-7 * math.pi
G = 9.81


class ParameterError(ValueError):
    """Raised for physically invalid parameter values."""


@dataclass(frozen=True)
class PhysicalParams:
    """Magnet geometry, masses and friction constants.

    ``coupling_Kd`` defaults to ``mu0 * M**2 / 2``. That value overestimates
    the holding force of the rig by an order of magnitude; use
    :func:`calibrate_coupling` to fit it to a detachment weight.
    """

    magnetization_M: float = 1.05e6
    coupling_Kd: float | None = None
    radius_R: float = 0.0125
    height_h: float = 0.01
    separation_d: float = 0.05
    mass_bottom_m1: float = 0.5
    mass_top_m2: float = 0.30
    fric_coulomb_Fc: float = 0.3
    fric_static_Fs: float = 0.6
    stribeck_vel_vs: float = 0.005
    fric_viscous_Kv_top: float = 1.0
    fric_viscous_Kv_bottom: float = 3.0
    sgn_smoothing_eps: float = 1e-3
    track_length: float = 0.60
    mu0: float = MU0

    def __post_init__(self):
        if self.coupling_Kd is None:
            object.__setattr__(self, "coupling_Kd", self.mu0 * self.magnetization_M**2 / 2)
        self.validate()

    def validate(self) -> None:
        for name in ("radius_R", "height_h", "separation_d", "mass_bottom_m1",
                     "mass_top_m2", "stribeck_vel_vs", "sgn_smoothing_eps", "track_length"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be positive and finite, got {value!r}")
        for name in ("fric_viscous_Kv_top", "fric_viscous_Kv_bottom", "coupling_Kd", "fric_coulomb_Fc"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ParameterError(f"{name} must be non-negative and finite, got {value!r}")
        if self.fric_static_Fs < self.fric_coulomb_Fc:
            raise ParameterError(
                f"fric_static_Fs ({self.fric_static_Fs}) must be >= fric_coulomb_Fc ({self.fric_coulomb_Fc})"
            )

    @property
    def coupling_constant(self) -> float:
        """Prefactor pi*Kd*R^4/2 of the lateral force, in N*m^2."""
        return math.pi * self.coupling_Kd * self.radius_R**4 / 2

    def as_vector(self) -> np.ndarray:
        return np.array([
            self.coupling_constant,
            geometric_factor(self.separation_d, self.height_h),
            self.separation_d,
            self.mass_bottom_m1,
            self.mass_top_m2,
            self.fric_coulomb_Fc,
            self.fric_static_Fs,
            self.stribeck_vel_vs,
            self.fric_viscous_Kv_top,
            self.fric_viscous_Kv_bottom,
            self.sgn_smoothing_eps,
            self.track_length,
        ])

    def with_(self, **changes) -> PhysicalParams:
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def geometric_factor(d, h):
    """Return ``1/d**2 + 1/(d+2h)**2 - 2/(d+h)**2`` in 1/m^2."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0) or not np.all(np.isfinite(d_arr)):
        raise ParameterError(f"gap d must be positive, got {d!r}")
    if np.any(np.asarray(h) < 0):
        raise ParameterError(f"height h must be non-negative, got {h!r}")
    return 1.0 / d**2 + 1.0 / (d + 2 * h) ** 2 - 2.0 / (d + h) ** 2


def lateral_magnetic_force(p1, p2, params: PhysicalParams):
    """Force (N) on the top magnet along the travel axis.

    Positive when it pulls the top magnet toward +x. The force on the bottom
    magnet is exactly the negation. Past the offset where the bracketed term
    of the force law changes sign the coupling is taken as zero.
    """
    delta = np.asarray(p1, dtype=float) - np.asarray(p2, dtype=float)
    out = _kernels.lateral_force(
        delta, params.coupling_constant,
        geometric_factor(params.separation_d, params.height_h), params.separation_d,
    )
    return out if np.ndim(out) else float(out)


def force_on_bottom(p1, p2, params: PhysicalParams):
    return -lateral_magnetic_force(p1, p2, params)


def smooth_sign(v, eps: float):
    return np.tanh(np.asarray(v, dtype=float) / eps)


def stribeck_friction(v, params: PhysicalParams):
    """Stribeck friction (N) opposing the top magnet's motion."""
    out = _kernels.stribeck(
        np.asarray(v, dtype=float), params.fric_coulomb_Fc, params.fric_static_Fs,
        params.stribeck_vel_vs, params.fric_viscous_Kv_top, params.sgn_smoothing_eps,
    )
    return out if np.ndim(out) else float(out)


def viscous_friction(v, params: PhysicalParams):
    """Viscous friction (N) opposing the bottom magnet's motion."""
    return params.fric_viscous_Kv_bottom * v


def peak_offset(params: PhysicalParams) -> float:
    """Offset (m) at which the restoring force is largest.

    A coarse grid brackets the maximum, then a bounded scalar search refines
    it.
    """
    A = geometric_factor(params.separation_d, params.height_h)
    zero_crossing = 1.0 / math.sqrt(1.5 * A)
    grid = np.linspace(0.0, zero_crossing, 2001)
    force = lateral_magnetic_force(grid, 0.0, params)
    i = int(np.argmax(force))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(
        lambda s: -lateral_magnetic_force(s, 0.0, params),
        bounds=(lo, hi), method="bounded", options={"xatol": 1e-12},
    )
    return float(res.x)


def peak_force(params: PhysicalParams) -> float:
    return lateral_magnetic_force(peak_offset(params), 0.0, params)


def calibrate_coupling(params: PhysicalParams, detach_weight: float = 1.45, g: float = G) -> PhysicalParams:
    """Return params with ``coupling_Kd`` set so the peak force holds ``detach_weight`` kg.

    With the bottom magnet locked and a slowly applied pull, the follower
    lets go once the pull exceeds the peak restoring force.
    """
    if detach_weight <= 0:
        raise ParameterError("detach_weight must be positive")
    target = detach_weight * g

    def residual(kd):
        return peak_force(params.with_(coupling_Kd=kd)) - target

    hi = max(params.coupling_Kd, 1.0)
    while residual(hi) < 0:
        hi *= 10
    kd = optimize.brentq(residual, 0.0, hi, xtol=1e-9, rtol=1e-14)
    return params.with_(coupling_Kd=kd)
