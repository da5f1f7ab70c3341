"""The characterization, estimation and recovery experiments as runnable scenarios.

Each ``run_*`` function takes a :class:`TrialConfig` and returns a
:class:`ScenarioResult` holding per-step logs, a summary dictionary and any
parameter files produced. Nothing is written until :meth:`ScenarioResult.write`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..control import (DetachState, RecoveryConfig, TrajectoryProfile, detachment_check,
                       human_trial_profile, path_length)
from ..estimator import LoggedTrial, NoiseConfig, rmse, tune_offline
from ..physics import G, PhysicalParams, calibrate_coupling, peak_force, peak_offset
from ..plant import Disturbance, DisturbanceEvent, PlantState, step
from ..sensing import Mode, SensorParams, measure
from .config import TrialConfig, format_noise, format_section
from .logs import LogRecord, write_log
from .sim import ClosedLoopResult, LoopSettings, random_loading, simulate_closed_loop

DEFAULT_WEIGHTS = tuple(round(0.1 * i, 1) for i in range(21))
DEFAULT_DYNAMIC_WEIGHTS = (0.0, 0.2, 0.5, 1.0, 1.5)
DEFAULT_SPEEDS = (10.0, 20.0, 30.0)
STATIC_STAIRS = 10


class SettlingError(RuntimeError):
    """A static trial ended with the follower still moving."""


@dataclass
class ScenarioResult:
    scenario: str
    summary: dict
    logs: dict[str, list[LogRecord]] = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)

    def write(self, out_dir) -> list[Path]:
        """Write CSV logs, extra files and ``summary.json`` into ``out_dir``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = [write_log(recs, out_dir / name) for name, recs in self.logs.items()]
        for name, text in self.files.items():
            path = out_dir / name
            path.write_text(text)
            written.append(path)
        path = out_dir / "summary.json"
        path.write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")
        written.append(path)
        return written


def _modes(cfg: TrialConfig) -> tuple[Mode, ...]:
    return {"full": (Mode.FULL,), "partial": (Mode.PARTIAL,), "both": (Mode.FULL, Mode.PARTIAL)}[cfg.mode]


def _loop(cfg: TrialConfig) -> LoopSettings:
    c, t = cfg.control, cfg.trial
    return LoopSettings(dt=t.dt, substeps=t.substeps, motor_gain=c.motor_gain, u_max=c.u_max,
                        position_gain=c.position_gain, speed_limit=c.speed_limit)


def _recovery(cfg: TrialConfig) -> RecoveryConfig:
    c = cfg.control
    if c.recovery_threshold is None:
        return RecoveryConfig.for_params(cfg.physics, proportional_gain=c.recovery_gain,
                                         max_recovery_speed=c.max_recovery_speed)
    return RecoveryConfig(c.recovery_threshold, c.recovery_gain, c.max_recovery_speed)


def _loading(cfg: TrialConfig, duration: float, stream: int) -> Disturbance:
    t = cfg.trial
    # a separate stream from the sensor noise, so loads do not shift with the mode
    rng = np.random.default_rng([cfg.seed, stream])
    return random_loading(duration, t.load_knot_spacing, rng, t.hand_force_sigma, t.drive_force_sigma)


def _mode_key(m) -> str:
    return "none" if m is None else m.value


# --- static -----------------------------------------------------------------

def static_loading(weight: float, ramp: float, hold: float, stairs: int = STATIC_STAIRS) -> Disturbance:
    """A hanging weight: its pull is raised in ``stairs`` equal steps, then held.

    The weight also rides along as extra follower mass.
    """
    pull = weight * G
    width = ramp / stairs
    events = [DisturbanceEvent(i * width, width, force=pull * (i + 1) / stairs, mass=weight)
              for i in range(stairs)]
    events.append(DisturbanceEvent(ramp, hold, force=pull, mass=weight))
    return Disturbance(tuple(events))


def static_run(params: PhysicalParams, sp: SensorParams, weight: float, ramp: float, hold: float,
               dt: float = 1e-3, substeps: int = 10, position: float = 0.30,
               seed: int = 0) -> tuple[list[LogRecord], float]:
    """Hold the driver still and load the follower. Returns the log and max |offset|."""
    dist = static_loading(weight, ramp, hold)
    rng = np.random.default_rng(seed)
    pvec = params.as_vector()
    peak = peak_offset(params)
    state = PlantState(position, 0.0, position, 0.0, 0.0)
    n_ctrl = int(round((ramp + hold) / (dt * substeps)))
    records, max_abs = [], 0.0
    nan = math.nan
    for k in range(n_ctrl):
        for i in range(substeps):
            state = step(state, 0.0, dt, params, dist, lock_bottom=True, pvec=pvec)
            max_abs = max(max_abs, abs(state.offset))
        z = measure(state, sp, Mode.FULL, rng).z
        records.append(LogRecord(state.t, state.x1, state.v1, state.x2, state.v2, z[0], z[1],
                                 nan, nan, nan, nan, state.offset, 0.0, 0,
                                 detachment_check(state.offset, peak=peak).value))
    return records, max_abs


def run_static_trial(cfg: TrialConfig) -> ScenarioResult:
    """Sweep hanging weights against a locked driver and find the first detachment."""
    t = cfg.trial
    params = cfg.physics
    peak = peak_offset(params)
    weights = tuple(sorted(cfg.weights if cfg.weights is not None else DEFAULT_WEIGHTS))
    logs, rows = {}, []
    first_detach = None
    for w in weights:
        recs, max_abs = static_run(params, cfg.sensing, w, t.static_ramp, t.static_hold,
                                   t.dt, t.substeps, seed=cfg.seed)
        detached = max_abs > peak
        if not detached and abs(recs[-1].v2) > t.static_settle_speed:
            raise SettlingError(f"follower still moving at {recs[-1].v2:.3g} m/s after the hold "
                                f"with {w} kg; lengthen trial.static_hold")
        logs[f"static_w{w:.2f}.csv"] = recs
        rows.append({"weight_kg": w, "max_offset_m": max_abs, "detached": detached})
        if detached and first_detach is None:
            first_detach = w
    held = [r["weight_kg"] for r in rows if not r["detached"]
            and (first_detach is None or r["weight_kg"] < first_detach)]
    summary = {
        "scenario": "static",
        "seed": cfg.seed,
        "peak_offset_m": peak,
        "peak_force_N": peak_force(params),
        "detach_weight_kg": first_detach,
        "max_held_weight_kg": max(held) if held else None,
        "max_offset_m": max(r["max_offset_m"] for r in rows),
        "weights": rows,
    }
    return ScenarioResult("static", summary, logs)


# --- dynamic ----------------------------------------------------------------

def run_dynamic_trial(cfg: TrialConfig) -> ScenarioResult:
    """One pass along the track per (speed, weight) cell, recording the peak offset."""
    t = cfg.trial
    speeds = tuple(cfg.speeds if cfg.speeds is not None else DEFAULT_SPEEDS)
    weights = tuple(sorted(cfg.weights if cfg.weights is not None else DEFAULT_DYNAMIC_WEIGHTS))
    loop = _loop(cfg)
    logs, cells = {}, []
    grid = np.empty((len(speeds), len(weights)))
    for i, rpm in enumerate(speeds):
        profile = TrajectoryProfile(t.dynamic_start, t.dynamic_span, rpm, t.dynamic_dwell,
                                    t.ramp_time, repetitions=1)
        duration = 2 * t.dynamic_dwell + profile.leg_time
        for j, w in enumerate(weights):
            dist = Disturbance((DisturbanceEvent(0.0, duration, mass=w),)) if w > 0 else None
            r = simulate_closed_loop(cfg.physics, cfg.sensing, profile, duration, loop, modes=(),
                                     disturbance=dist, seed=cfg.seed)
            logs[f"dynamic_{rpm:g}rpm_w{w:.2f}.csv"] = r.records[None]
            grid[i, j] = r.max_abs_offset
            cells.append({"rpm": rpm, "weight_kg": w, "peak_offset_m": r.max_abs_offset,
                          "detached": r.detached_steps > 0})
    monotone = {f"{rpm:g}": bool(np.all(np.diff(grid[i]) >= 0)) for i, rpm in enumerate(speeds)}
    i_max, j_max = np.unravel_index(np.argmax(grid), grid.shape)
    summary = {
        "scenario": "dynamic",
        "seed": cfg.seed,
        "cells": cells,
        "monotone_in_weight": monotone,
        "max_cell": {"rpm": speeds[i_max], "weight_kg": weights[j_max]},
        "max_offset_m": float(grid.max()),
    }
    return ScenarioResult("dynamic", summary, logs)


# --- human trial ------------------------------------------------------------

def _rmse_table(r: ClosedLoopResult) -> dict:
    table = {}
    for m, est in r.estimates.items():
        table[m.value] = {
            "bottom_cm": rmse(100 * est[:, 0], 100 * r.truth[:, 0]),
            "top_cm": rmse(100 * est[:, 2], 100 * r.truth[:, 2]),
        }
    return table


def _health(r: ClosedLoopResult) -> dict:
    return {m.value: {"max_asymmetry": a, "min_eigenvalue": e}
            for m, (a, e) in r.covariance_health.items()}


def run_human_trial(cfg: TrialConfig) -> ScenarioResult:
    """The four-minute back-and-forth session with a loaded armrest, filtered in each mode."""
    t = cfg.trial
    profile = human_trial_profile(t.start_position, t.span, (15, 25), t.cycles, t.dwell, t.ramp_time)
    duration = cfg.duration or profile.duration
    r = simulate_closed_loop(cfg.physics, cfg.sensing, profile, duration, _loop(cfg),
                             noise=cfg.estimator.noise_config(cfg.sensing), modes=_modes(cfg),
                             disturbance=_loading(cfg, duration, 1), seed=cfg.seed)
    travelled = float(np.sum(np.abs(np.diff(r.truth[:, 0]))))
    summary = {
        "scenario": "human",
        "seed": cfg.seed,
        "duration_s": duration,
        "rmse_cm": _rmse_table(r),
        "reference_path_m": path_length(profile) if cfg.duration is None else None,
        "bottom_travel_m": travelled,
        "max_offset_m": r.max_abs_offset,
        "interrupter_events": r.interrupter_events,
        "detached_steps": r.detached_steps,
        "covariance": _health(r),
    }
    logs = {f"human_{_mode_key(m)}.csv": recs for m, recs in r.records.items()}
    return ScenarioResult("human", summary, logs)


# --- recovery ---------------------------------------------------------------

def recovery_pulse(cfg: TrialConfig) -> Disturbance:
    t = cfg.trial
    resistance = t.pulse_resistance
    if resistance is None:
        resistance = 2.0 * peak_force(cfg.physics)
    return Disturbance((DisturbanceEvent(t.pulse_start, t.pulse_duration, resistance=resistance),))


def recovered_after(times: np.ndarray, offsets: np.ndarray, threshold: float, t_from: float) -> float | None:
    """Seconds after ``t_from`` from which |offset| stays under ``threshold``; None if never."""
    after = times >= t_from
    over = np.nonzero(after & (np.abs(offsets) >= threshold))[0]
    if over.size == 0:
        return 0.0
    last = over[-1]
    if last + 1 >= times.size:
        return None
    return float(times[last + 1] - t_from)


def run_recovery_demo(cfg: TrialConfig) -> ScenarioResult:
    """A resistive pulse on the follower, with the recovery law on and then off."""
    t = cfg.trial
    rc = _recovery(cfg)
    rmode = Mode(cfg.control.recovery_mode)
    modes = tuple(dict.fromkeys((rmode,) + _modes(cfg)))
    profile = TrajectoryProfile(t.start_position, t.span, 15, t.dwell, t.ramp_time, repetitions=1)
    pulse_end = t.pulse_start + t.pulse_duration
    # stop before the return leg so a lost follower is not picked up again
    duration = cfg.duration or t.dwell + profile.leg_time
    if duration < pulse_end + t.recovery_window:
        raise ValueError(f"recovery demo of {duration:.3g} s is too short to judge recovery "
                         f"{t.recovery_window} s after a pulse ending at {pulse_end} s")
    peak = peak_offset(cfg.physics)
    noise = cfg.estimator.noise_config(cfg.sensing)
    pulse = recovery_pulse(cfg)
    summary = {"scenario": "recovery", "seed": cfg.seed, "threshold_m": rc.offset_threshold,
               "peak_offset_m": peak, "pulse_resistance_N": pulse.events[0].resistance,
               "pulse_start_s": t.pulse_start, "pulse_end_s": pulse_end}
    logs = {}
    for label, recovery in (("on", rc), ("off", None)):
        r = simulate_closed_loop(cfg.physics, cfg.sensing, profile, duration, _loop(cfg), noise=noise,
                                 modes=modes, disturbance=pulse, recovery=recovery,
                                 recovery_mode=rmode, seed=cfg.seed)
        back = recovered_after(r.times, r.offsets, rc.offset_threshold, pulse_end)
        final = detachment_check(r.offsets[-1], peak=peak)
        summary[label] = {
            "max_offset_m": r.max_abs_offset,
            "final_offset_m": float(r.offsets[-1]),
            "final_state": final.value,
            "ever_detached": r.max_abs_offset > peak,
            "recovered_after_s": back,
            "recovery_steps": r.recovery_steps,
            "rmse_cm": _rmse_table(r),
            "covariance": _health(r),
        }
        for m, recs in r.records.items():
            logs[f"recovery_{label}_{_mode_key(m)}.csv"] = recs
    on, off = summary["on"], summary["off"]
    summary["recovery_held"] = (not on["ever_detached"] and on["recovered_after_s"] is not None
                                and on["recovered_after_s"] <= t.recovery_window)
    summary["detached_without_recovery"] = off["final_state"] == DetachState.DETACHED.value
    summary["max_offset_m"] = max(on["max_offset_m"], off["max_offset_m"])
    return ScenarioResult("recovery", summary, logs)


# --- tuning and calibration -------------------------------------------------

def logged_trials(cfg: TrialConfig) -> list[LoggedTrial]:
    """Short human-trial runs with independent loads and sensor noise, for offline tuning."""
    t = cfg.trial
    profile = human_trial_profile(t.start_position, t.span, (15, 25), t.cycles, t.dwell, t.ramp_time)
    duration = cfg.duration or t.tune_duration
    out = []
    for i in range(t.tune_trials):
        sub = cfg.with_(seed=cfg.seed + 1000 * (i + 1))
        r = simulate_closed_loop(cfg.physics, sub.sensing, profile, duration, _loop(cfg), modes=(),
                                 disturbance=_loading(sub, duration, 1), seed=sub.seed)
        out.append(r.trial)
    return out


def run_tune(cfg: TrialConfig) -> ScenarioResult:
    """Grid-search diagonal Q and an R scale on simulated logs; emit a noise file."""
    trials = logged_trials(cfg)
    grid = cfg.estimator.grid(cfg.sensing)
    result = tune_offline(trials, grid, cfg.physics, Mode.FULL)
    nc: NoiseConfig = result.noise
    e = cfg.estimator
    r_scale = e.grid_r_scale[result.index % len(e.grid_r_scale)]
    summary = {
        "scenario": "tune",
        "seed": cfg.seed,
        "trials": len(trials),
        "grid_size": len(grid),
        "best_index": result.index,
        "score_cm": result.score,
        "scores_cm": result.scores,
        "q_diag": [float(q) for q in np.diag(nc.Q)],
        "r_scale": r_scale,
        "r_diag": [float(r) for r in np.diag(nc.R)],
    }
    text = format_noise(nc, r_scale, header="tuned process noise and converged P0")
    return ScenarioResult("tune", summary, files={"noise.cfg": text})


def run_calibrate(cfg: TrialConfig) -> ScenarioResult:
    """Scale the coupling constant so the peak lateral force holds the calibration weight."""
    weight = cfg.trial.calibration_weight
    params = calibrate_coupling(cfg.physics, weight)
    text = (f"# coupling scaled so the peak force equals {weight} kg x {G} m/s^2\n"
            + format_section("physics", params))
    summary = {
        "scenario": "calibrate",
        "calibration_weight_kg": weight,
        "coupling_Kd": params.coupling_Kd,
        "peak_force_N": peak_force(params),
        "peak_offset_m": peak_offset(params),
        "max_offset_m": peak_offset(params),
    }
    return ScenarioResult("calibrate", summary, files={"physics.cfg": text})


RUNNERS = {
    "static": run_static_trial,
    "dynamic": run_dynamic_trial,
    "human": run_human_trial,
    "recovery": run_recovery_demo,
    "tune": run_tune,
    "calibrate": run_calibrate,
}


def run_scenario(cfg: TrialConfig) -> ScenarioResult:
    return RUNNERS[cfg.scenario](cfg)
