"""Simulated encoder, laser ranger and photo-interrupter events."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .plant import PlantState


class Mode(str, enum.Enum):
    FULL = "full"      # encoder + laser
    PARTIAL = "partial"  # encoder only

    @property
    def dim(self) -> int:
        return 2 if self is Mode.FULL else 1


@dataclass(frozen=True)
class SensorParams:
    """Sensor characteristics.

    ``encoder_resolution`` of 0 disables quantization (an ideal encoder).
    """

    encoder_resolution: float = 1e-4
    laser_noise_sigma: float = 3e-3
    laser_bias: float = 0.0
    interrupter_positions: tuple[float, ...] = (0.0, 0.15, 0.30, 0.45, 0.60)
    interrupter_impulse: float = 0.05
    interrupters_enabled: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "interrupter_positions", tuple(float(p) for p in self.interrupter_positions))
        if self.encoder_resolution < 0:
            raise ValueError("encoder_resolution must be >= 0")
        if self.laser_noise_sigma < 0:
            raise ValueError("laser_noise_sigma must be >= 0")
        if len(self.interrupter_positions) != 5:
            raise ValueError("expected 5 interrupter positions")
        if self.interrupter_impulse < 0:
            raise ValueError("interrupter_impulse must be >= 0")


@dataclass(frozen=True)
class Measurement:
    z: np.ndarray
    mode: Mode
    t: float

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        object.__setattr__(self, "z", z)
        if z.shape != (self.mode.dim,):
            raise ValueError(f"{self.mode.value} measurement needs {self.mode.dim} values, got {z.shape}")
        if not np.all(np.isfinite(z)):
            raise ValueError(f"non-finite measurement {z}")


def encoder_read(state: PlantState, sp: SensorParams) -> float:
    res = sp.encoder_resolution
    if res == 0:
        return state.x1
    return round(state.x1 / res) * res


def laser_read(state: PlantState, sp: SensorParams, rng: np.random.Generator) -> float:
    if sp.laser_noise_sigma == 0:
        return state.x2 + sp.laser_bias
    return state.x2 + sp.laser_bias + sp.laser_noise_sigma * rng.standard_normal()


def measure(state: PlantState, sp: SensorParams, mode: Mode, rng: np.random.Generator) -> Measurement:
    mode = Mode(mode)
    if mode is Mode.FULL:
        z = [encoder_read(state, sp), laser_read(state, sp, rng)]
    else:
        z = [encoder_read(state, sp)]
    return Measurement(np.array(z), mode, state.t)


def interrupter_disturbance(prev: PlantState, state: PlantState, sp: SensorParams, dt: float) -> float | None:
    """Force on the bottom magnet for the next step if it just passed an interrupter.

    A crossing is counted when the interrupter position lies in the half-open
    interval swept by ``x1`` during the step. The returned force opposes the
    direction of travel and lasts one step, delivering ``interrupter_impulse``.
    """
    if not sp.interrupters_enabled or sp.interrupter_impulse == 0:
        return None
    a, b = prev.x1, state.x1
    if a == b:
        return None
    for pos in sp.interrupter_positions:
        # moving up: (a, b]; moving down: [b, a)
        hit = (a < pos <= b) if b > a else (b <= pos < a)
        if hit:
            direction = 1.0 if b > a else -1.0
            return -direction * sp.interrupter_impulse / dt
    return None
