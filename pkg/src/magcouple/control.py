"""Reference trajectories, motor velocity loop and offset recovery."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .physics import PhysicalParams, peak_offset
from .plant import PlantState

# (RPM, linear speed in m/s) pairs published for the rig. The 20 RPM pair
# implies a different belt ratio from the rest and is left out of the fit.
PUBLISHED_SPEEDS = ((10, 0.0146), (15, 0.022), (20, 0.035), (25, 0.037), (30, 0.043))
EXCLUDED_RPM = (20,)


def _fit_belt_ratio() -> float:
    pairs = np.array([p for p in PUBLISHED_SPEEDS if p[0] not in EXCLUDED_RPM], dtype=float)
    rpm, speed = pairs[:, 0], pairs[:, 1]
    # least squares through the origin keeps the conversion linear
    return float(rpm @ speed / (rpm @ rpm))


K_BELT = _fit_belt_ratio()


def rpm_to_speed(rpm) -> float:
    """Slider speed (m/s) for a motor speed in RPM."""
    if np.any(np.asarray(rpm) <= 0):
        raise ValueError(f"rpm must be positive, got {rpm!r}")
    return K_BELT * rpm


@dataclass(frozen=True)
class TrajectoryProfile:
    """Back-and-forth trapezoidal motion between ``start`` and ``start + span``.

    One cycle is: dwell, forward leg, dwell, return leg. Each leg ramps the
    speed linearly over ``ramp_time``, cruises, and ramps down. After
    ``repetitions`` cycles the reference rests at ``start``; ``None`` repeats
    forever.
    """

    start: float
    span: float
    rpm: float
    dwell: float = 1.5
    ramp_time: float = 0.1
    repetitions: int | None = None

    def __post_init__(self):
        if self.rpm <= 0:
            raise ValueError("profile speed must be positive")
        if self.span == 0:
            raise ValueError("profile span must be non-zero")
        if self.dwell < 0 or self.ramp_time < 0:
            raise ValueError("dwell and ramp_time must be >= 0")
        if abs(self.span) < self.speed * self.ramp_time:
            raise ValueError("span too short to reach cruise speed")

    @property
    def speed(self) -> float:
        return rpm_to_speed(self.rpm)

    @property
    def leg_time(self) -> float:
        return abs(self.span) / self.speed + self.ramp_time

    @property
    def period(self) -> float:
        return 2.0 * (self.dwell + self.leg_time)

    @property
    def duration(self) -> float:
        return math.inf if self.repetitions is None else self.repetitions * self.period

    @property
    def path_length(self) -> float:
        return math.inf if self.repetitions is None else 2 * abs(self.span) * self.repetitions

    def _leg(self, s: float) -> tuple[float, float]:
        """Distance covered and speed, ``s`` seconds into a leg."""
        v, tr, T = self.speed, self.ramp_time, self.leg_time
        if s <= 0:
            return 0.0, 0.0
        if s >= T:
            return abs(self.span), 0.0
        if tr > 0 and s < tr:
            return 0.5 * v * s * s / tr, v * s / tr
        if tr > 0 and s > T - tr:
            r = T - s
            return abs(self.span) - 0.5 * v * r * r / tr, v * r / tr
        return v * (s - 0.5 * tr), v

    def reference(self, t: float) -> tuple[float, float]:
        if t < 0:
            raise ValueError("t must be >= 0")
        if t >= self.duration:
            return self.start, 0.0
        direction = math.copysign(1.0, self.span)
        s = t % self.period
        half = self.dwell + self.leg_time
        if s < half:
            dist, vel = self._leg(s - self.dwell)
            return self.start + direction * dist, direction * vel
        dist, vel = self._leg(s - half - self.dwell)
        return self.start + self.span - direction * dist, -direction * vel


@dataclass(frozen=True)
class ProfileSequence:
    """Finite profiles played back to back."""

    profiles: tuple[TrajectoryProfile, ...]

    def __post_init__(self):
        if any(p.repetitions is None for p in self.profiles):
            raise ValueError("every profile in a sequence needs a repetition count")

    @property
    def duration(self) -> float:
        return sum(p.duration for p in self.profiles)

    @property
    def path_length(self) -> float:
        return sum(p.path_length for p in self.profiles)

    def reference(self, t: float) -> tuple[float, float]:
        for p in self.profiles:
            if t < p.duration:
                return p.reference(t)
            t -= p.duration
        return self.profiles[-1].start, 0.0


def commanded_motion(profile, t: float) -> tuple[float, float]:
    """Target (position m, velocity m/s) at time ``t``."""
    return profile.reference(t)


def human_trial_profile(start: float = 0.10, span: float = 0.30, rpms: Sequence[float] = (15, 25),
                        cycles: Sequence[int] = (4, 6), dwell: float = 1.5,
                        ramp_time: float = 0.1) -> ProfileSequence:
    """About four minutes of back-and-forth travel, first at 15 then at 25 RPM."""
    return ProfileSequence(tuple(
        TrajectoryProfile(start, span, rpm, dwell, ramp_time, n) for rpm, n in zip(rpms, cycles)
    ))


def path_length(profile, dt: float = 1e-3) -> float:
    """Distance travelled by the reference, by integrating its speed."""
    t = np.arange(0.0, profile.duration, dt)
    v = np.array([abs(profile.reference(ti)[1]) for ti in t])
    return float(np.sum(v) * dt)


def motor_force(v_target: float, state: PlantState, gain: float, u_max: float = 50.0) -> float:
    """Saturated proportional velocity loop acting on the bottom magnet."""
    if gain <= 0:
        raise ValueError("motor gain must be positive")
    u = gain * (v_target - state.v1)
    return min(max(u, -u_max), u_max)


@dataclass(frozen=True)
class RecoveryConfig:
    offset_threshold: float
    proportional_gain: float = 60.0
    max_recovery_speed: float = 0.05

    def __post_init__(self):
        if self.offset_threshold <= 0:
            raise ValueError("offset_threshold must be positive")
        if self.proportional_gain <= 0:
            raise ValueError("proportional_gain must be positive")
        if self.max_recovery_speed <= 0:
            raise ValueError("max_recovery_speed must be positive")

    @classmethod
    def for_params(cls, params: PhysicalParams, fraction: float = 0.5, **kw) -> RecoveryConfig:
        return cls(offset_threshold=fraction * peak_offset(params), **kw)


def offset_recovery(offset: float, v_cmd: float, rc: RecoveryConfig) -> float:
    """Adjust the commanded bottom velocity when the magnets drift apart.

    Inside the threshold band the command passes through. Beyond it the
    bottom magnet is driven toward the top one in proportion to the excess:
    against the travel direction when the follower lags, along it when the
    follower leads. The result is clipped to ``max_recovery_speed``.
    """
    excess = abs(offset) - rc.offset_threshold
    if excess <= 0:
        return v_cmd
    adjusted = v_cmd - math.copysign(rc.proportional_gain * excess, offset)
    cap = rc.max_recovery_speed
    return min(max(adjusted, -cap), cap)


class DetachState(str, enum.Enum):
    ATTACHED = "attached"
    SEPARATING = "separating"
    DETACHED = "detached"


def detachment_check(offset: float, params: PhysicalParams | None = None,
                     peak: float | None = None) -> DetachState:
    """Classify an offset against the offset of peak restoring force.

    Pass ``peak`` to skip recomputing it from ``params``.
    """
    if peak is None:
        if params is None:
            raise ValueError("need params or peak")
        peak = peak_offset(params)
    a = abs(offset)
    if a < 0.8 * peak:
        return DetachState.ATTACHED
    if a <= peak:
        return DetachState.SEPARATING
    return DetachState.DETACHED
