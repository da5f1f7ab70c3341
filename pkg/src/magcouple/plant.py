"""Two-body state-space plant: bottom (driver) and top (follower) magnets."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .physics import PhysicalParams


class IntegrationError(FloatingPointError):
    """A step produced a non-finite state."""


@dataclass(frozen=True)
class PlantState:
    x1: float = 0.0
    v1: float = 0.0
    x2: float = 0.0
    v2: float = 0.0
    t: float = 0.0

    @classmethod
    def from_vector(cls, x, t: float = 0.0) -> PlantState:
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]), float(t))

    def as_vector(self) -> np.ndarray:
        return np.array([self.x1, self.v1, self.x2, self.v2])

    @property
    def offset(self) -> float:
        """Signed driver-minus-follower position, m."""
        return self.x1 - self.x2


@dataclass(frozen=True)
class DisturbanceEvent:
    """A window during which the follower is loaded.

    ``force`` is a constant push toward -x (a hanging calibration weight, for
    instance). ``resistance`` is a hand gripping the armrest: it holds the
    follower still while the other forces on it stay below ``resistance``
    newtons, and brakes it with that force otherwise. ``mass`` is added to
    the follower. ``drive``
    is an extra force on the bottom magnet along +x that the motor command
    does not account for (belt drag, cogging).
    """

    start: float
    duration: float
    force: float = 0.0
    resistance: float = 0.0
    mass: float = 0.0
    drive: float = 0.0

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError(f"disturbance duration must be >= 0, got {self.duration}")
        if self.resistance < 0:
            raise ValueError(f"disturbance resistance must be >= 0, got {self.resistance}")
        if self.mass < 0:
            raise ValueError(f"disturbance mass must be >= 0, got {self.mass}")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def active(self, t: float) -> bool:
        return self.start <= t < self.end


@dataclass(frozen=True)
class Disturbance:
    events: tuple[DisturbanceEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(sorted(self.events, key=lambda e: e.start)))
        for a, b in zip(self.events, self.events[1:]):
            if b.start < a.end:
                raise ValueError(f"disturbance events overlap: {a} and {b}")
        object.__setattr__(self, "_starts", [e.start for e in self.events])

    def event_at(self, t: float) -> DisturbanceEvent | None:
        i = bisect.bisect_right(self._starts, t) - 1
        if i >= 0 and self.events[i].active(t):
            return self.events[i]
        return None

    def merged(self, other: Disturbance) -> Disturbance:
        return Disturbance(self.events + other.events)

    def vector_at(self, t: float, lock_bottom: bool = False, bottom_force: float = 0.0) -> np.ndarray:
        ev = self.event_at(t)
        vec = np.zeros(_kernels.N_DIST)
        if ev is not None:
            vec[0] = ev.force
            vec[1] = ev.resistance
            vec[2] = ev.mass
            vec[4] = ev.drive
        vec[3] = 1.0 if lock_bottom else 0.0
        vec[4] += bottom_force
        return vec


NO_DISTURBANCE = Disturbance()


def _dist_vector(d: Disturbance | None, t: float, lock_bottom: bool, bottom_force: float) -> np.ndarray:
    return (d or NO_DISTURBANCE).vector_at(t, lock_bottom, bottom_force)


def net_forces(state: PlantState, u: float, params: PhysicalParams,
               d: Disturbance | None = None, bottom_force: float = 0.0) -> tuple[float, float]:
    """Net force on (bottom, top) magnets in N.

    The magnetic term enters the two bodies with opposite signs, so their sum
    depends only on the motor force, friction and disturbances.
    """
    dist = _dist_vector(d, state.t, False, bottom_force)
    fmag, fric1, fric2, fdist = _kernels.forces(state.as_vector(), u, params.as_vector(), dist)
    return u + bottom_force - fmag - fric1, fmag - fric2 - fdist


def derivatives(state: PlantState, u: float, params: PhysicalParams,
                d: Disturbance | None = None, lock_bottom: bool = False,
                bottom_force: float = 0.0) -> np.ndarray:
    """Return ``(dx1, dv1, dx2, dv2)``."""
    out = np.empty(4)
    _kernels.deriv(state.as_vector(), float(u), params.as_vector(),
                   _dist_vector(d, state.t, lock_bottom, bottom_force), out)
    return out


def step(state: PlantState, u: float, dt: float, params: PhysicalParams,
         d: Disturbance | None = None, lock_bottom: bool = False,
         bottom_force: float = 0.0, pvec: np.ndarray | None = None) -> PlantState:
    """Advance one classical RK4 step of length ``dt``, then clamp to the track.

    Inputs and disturbance are held at their values at the start of the step.
    ``pvec`` may carry a precomputed ``params.as_vector()`` for tight loops.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if pvec is None:
        pvec = params.as_vector()
    x = _kernels.rk4_step(state.as_vector(), float(u), float(dt), pvec,
                          _dist_vector(d, state.t, lock_bottom, bottom_force))
    if not np.all(np.isfinite(x)):
        raise IntegrationError(f"integration blew up stepping from {state} with u={u}, dt={dt}")
    return PlantState.from_vector(x, state.t + dt)


def kinetic_energy(state: PlantState, params: PhysicalParams) -> float:
    return 0.5 * params.mass_bottom_m1 * state.v1**2 + 0.5 * params.mass_top_m2 * state.v2**2
