"""Closed-loop simulation shared by the dynamic, human and recovery scenarios."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..control import DetachState, RecoveryConfig, commanded_motion, detachment_check, motor_force, offset_recovery
from ..estimator import ExtendedKalmanFilter, LoggedTrial, NoiseConfig
from ..physics import PhysicalParams, peak_offset
from ..plant import Disturbance, DisturbanceEvent, PlantState, step
from ..sensing import Measurement, Mode, SensorParams, interrupter_disturbance, measure
from .logs import LogRecord


@dataclass(frozen=True)
class LoopSettings:
    dt: float = 1e-3
    substeps: int = 10
    motor_gain: float = 500.0
    u_max: float = 50.0
    position_gain: float = 2.0
    speed_limit: float = 0.05


@dataclass
class ClosedLoopResult:
    records: dict[Mode, list[LogRecord]]
    trial: LoggedTrial
    times: np.ndarray
    estimates: dict[Mode, np.ndarray]
    offsets: np.ndarray
    max_abs_offset: float
    recovery_steps: int
    interrupter_events: int
    detached_steps: int
    final_state: PlantState
    covariance_health: dict[Mode, tuple[float, float]] = field(default_factory=dict)

    @property
    def truth(self) -> np.ndarray:
        return self.trial.truth

    def detach_states(self) -> list[DetachState]:
        first = next(iter(self.records.values()))
        return [DetachState(r.detach_state) for r in first]


def random_loading(duration: float, knot_spacing: float, rng: np.random.Generator,
                   hand_sigma: float = 0.0, drive_sigma: float = 0.0, start: float = 0.0,
                   resolution: float = 0.01) -> Disturbance:
    """Slowly varying random forces as a schedule of short constant windows.

    Levels are drawn at knots ``knot_spacing`` apart and linearly
    interpolated, then held for ``resolution`` seconds at a time.
    ``hand_sigma`` scales a push on the follower (the patient's hand),
    ``drive_sigma`` an unmodeled force on the driver (belt drag, cogging).
    """
    if duration <= 0 or (hand_sigma == 0 and drive_sigma == 0):
        return Disturbance()
    n_knots = int(np.ceil(duration / knot_spacing)) + 1
    knots = np.arange(n_knots) * knot_spacing
    hand_k = hand_sigma * rng.standard_normal(n_knots)
    drive_k = drive_sigma * rng.standard_normal(n_knots)
    n = int(np.ceil(duration / resolution))
    mids = (np.arange(n) + 0.5) * resolution
    hand = np.interp(mids, knots, hand_k)
    drive = np.interp(mids, knots, drive_k)
    edges = start + np.arange(n + 1) * resolution
    return Disturbance(tuple(
        DisturbanceEvent(float(edges[i]), float(edges[i + 1] - edges[i]), force=float(h), drive=float(d))
        for i, (h, d) in enumerate(zip(hand, drive))
    ))


def simulate_closed_loop(
    params: PhysicalParams,
    sp: SensorParams,
    profile,
    duration: float,
    loop: LoopSettings = LoopSettings(),
    noise: NoiseConfig | None = None,
    modes: tuple[Mode, ...] = (Mode.FULL,),
    disturbance: Disturbance | None = None,
    recovery: RecoveryConfig | None = None,
    recovery_mode: Mode = Mode.FULL,
    filter_params: PhysicalParams | None = None,
    seed: int = 0,
) -> ClosedLoopResult:
    """Drive the plant along ``profile`` with the velocity loop and filters in the loop.

    The motor loop and the plant run every ``loop.dt``; sensing, estimation,
    recovery and logging run once per ``loop.substeps`` integrator steps.
    Every filter sees the same measurement stream. Recovery, when enabled,
    reads the offset estimated by the ``recovery_mode`` filter.
    """
    modes = tuple(Mode(m) for m in modes)
    if recovery is not None and Mode(recovery_mode) not in modes:
        raise ValueError("recovery needs a filter running in recovery_mode")
    filter_params = filter_params or params
    rng = np.random.default_rng(seed)
    x_ref0, _ = commanded_motion(profile, 0.0)
    state = PlantState(x_ref0, 0.0, x_ref0, 0.0, 0.0)
    pvec = params.as_vector()
    peak = peak_offset(params)
    dt, n_sub = loop.dt, loop.substeps
    n_ctrl = int(round(duration / (dt * n_sub)))

    filters = {}
    if modes:
        if noise is None:
            raise ValueError("filters need a NoiseConfig")
        x0 = np.array([state.x1, 0.0, state.x2, 0.0])
        for m in modes:
            filters[m] = ExtendedKalmanFilter(filter_params, noise.with_(x0=x0), m)

    records = {m: [] for m in (modes or (None,))}
    u_log = np.empty((n_ctrl, n_sub))
    z_log = np.empty((n_ctrl, 2))
    truth = np.empty((n_ctrl, 4))
    times = np.empty(n_ctrl)
    est = {m: np.empty((n_ctrl, 4)) for m in modes}
    offsets = np.empty(n_ctrl)
    max_abs = 0.0
    n_recovery = n_events = n_detached = 0
    bottom_force = 0.0
    enc_prev = state.x1

    for k in range(n_ctrl):
        t_k = k * n_sub * dt
        x_ref, v_ref = commanded_motion(profile, t_k)
        v_cmd = v_ref + loop.position_gain * (x_ref - enc_prev)
        v_cmd = min(max(v_cmd, -loop.speed_limit), loop.speed_limit)
        recovering = False
        if recovery is not None:
            xh = filters[Mode(recovery_mode)].x_hat
            est_offset = xh[0] - xh[2]
            recovering = bool(abs(est_offset) > recovery.offset_threshold)
            v_cmd = offset_recovery(est_offset, v_cmd, recovery)
        n_recovery += recovering

        for i in range(n_sub):
            t_i = (k * n_sub + i) * dt
            state = PlantState(state.x1, state.v1, state.x2, state.v2, t_i)
            u = motor_force(v_cmd, state, loop.motor_gain, loop.u_max)
            u_log[k, i] = u
            prev = state
            state = step(state, u, dt, params, disturbance, bottom_force=bottom_force, pvec=pvec)
            kick = interrupter_disturbance(prev, state, sp, dt)
            bottom_force = 0.0 if kick is None else kick
            n_events += kick is not None
            max_abs = max(max_abs, abs(state.offset))

        state = PlantState(state.x1, state.v1, state.x2, state.v2, (k + 1) * n_sub * dt)
        z = measure(state, sp, Mode.FULL, rng)
        enc_prev = z.z[0]
        z_log[k] = z.z
        truth[k] = state.as_vector()
        times[k] = state.t
        offsets[k] = state.offset
        detach = detachment_check(state.offset, peak=peak)
        n_detached += detach is DetachState.DETACHED
        u_mean = float(np.mean(u_log[k]))

        for m, ekf in filters.items():
            zm = Measurement(z.z[: m.dim], m, state.t)
            est[m][k] = ekf.step(u_log[k], dt, zm)
        for m in records:
            xh = est[m][k] if m is not None else (np.nan,) * 4
            z2 = z.z[1] if m is Mode.FULL or m is None else np.nan
            records[m].append(LogRecord(
                state.t, state.x1, state.v1, state.x2, state.v2, z.z[0], z2,
                *map(float, xh), state.offset, u_mean, int(recovering), detach.value,
            ))

    trial = LoggedTrial(dt=dt, u=u_log, z=z_log, truth=truth,
                        x0=np.array([x_ref0, 0.0, x_ref0, 0.0]))
    health = {m: (f.max_asymmetry, f.min_eigenvalue) for m, f in filters.items()}
    return ClosedLoopResult(records, trial, times, est, offsets, max_abs, n_recovery,
                            n_events, n_detached, state, health)
