"""The twelve acceptance criteria, each reported as one PASS/FAIL line."""

import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import ACCEPTANCE_LINES
from magcouple.control import human_trial_profile, path_length
from magcouple.estimator import (EstimatorState, NoiseConfig, predict, rmse, run_filter, sensor_R,
                                 update)
from magcouple.harness.config import from_mapping
from magcouple.harness.scenarios import run_scenario
from magcouple.harness.sim import simulate_closed_loop
from magcouple.physics import (PhysicalParams, calibrate_coupling, force_on_bottom, lateral_magnetic_force,
                               stribeck_friction, viscous_friction)
from magcouple.plant import PlantState, step
from magcouple.sensing import Measurement, Mode, SensorParams
from test_estimator import jacobian_slope

SYMMETRY_LIMIT = 1e-12
EIGEN_LIMIT = -1e-10


def report(n: int, ok: bool, detail: str) -> None:
    line = f"CRIT {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def timed(cfg):
    start = time.perf_counter()
    result = run_scenario(cfg)
    return result, time.perf_counter() - start


@pytest.fixture(scope="module")
def static_run():
    return timed(from_mapping({"scenario": "static"}))


@pytest.fixture(scope="module")
def human_run():
    return timed(from_mapping({"scenario": "human", "mode": "both"}))


@pytest.fixture(scope="module")
def recovery_run():
    return timed(from_mapping({"scenario": "recovery"}))


def test_crit01_static_detachment_window(static_run):
    result, seconds = static_run
    s = result.summary
    held = {row["weight_kg"]: not row["detached"] for row in s["weights"]}
    ok = (held.get(1.0, False) and s["detach_weight_kg"] is not None
          and 1.2 <= s["detach_weight_kg"] <= 1.7 and seconds < 10)
    report(1, ok, f"first detachment {s['detach_weight_kg']} kg, 1.0 kg held={held.get(1.0)}, {seconds:.1f} s")


def test_crit02_rmse_ordering(human_run):
    result, seconds = human_run
    r = result.summary["rmse_cm"]
    full, partial = r["full"], r["partial"]
    ordering = (full["bottom_cm"] < full["top_cm"] and partial["bottom_cm"] < partial["top_cm"]
                and partial["top_cm"] > full["top_cm"])
    soft = full["bottom_cm"] <= 0.3 and full["top_cm"] <= 1.0
    report(2, ordering and soft and seconds < 60,
           f"FULL {full['bottom_cm']:.4f}/{full['top_cm']:.4f} cm, PARTIAL {partial['bottom_cm']:.4f}/"
           f"{partial['top_cm']:.4f} cm (bottom/top), {seconds:.1f} s")


@given(st.integers(0, 2**32 - 1))
def test_crit03_property_random_filter_steps(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((4, 4))
    nc = NoiseConfig(Q=np.diag(10.0 ** rng.uniform(-10, -2, 4)), R=sensor_R(SensorParams()),
                     P0=a @ a.T * 1e-4, x0=np.array([0.3, 0.0, 0.3, 0.0]))
    params = calibrate_coupling(PhysicalParams())
    est = EstimatorState.initial(nc)
    for k in range(20):
        est = predict(est, rng.uniform(-5, 5, 10), 1e-3, params, nc)
        z = est.x_hat[[0, 2]] + rng.normal(0, 1e-3, 2)
        est = update(est, Measurement(z, Mode.FULL, est.t), nc)
        assert np.max(np.abs(est.P - est.P.T)) <= SYMMETRY_LIMIT
        assert np.linalg.eigvalsh(est.P).min() >= EIGEN_LIMIT


def test_crit03_covariance_health(human_run, recovery_run):
    worst_asym, worst_eig = 0.0, np.inf
    health = list(human_run[0].summary["covariance"].values())
    for label in ("on", "off"):
        health += list(recovery_run[0].summary[label]["covariance"].values())
    for h in health:
        worst_asym = max(worst_asym, h["max_asymmetry"])
        worst_eig = min(worst_eig, h["min_eigenvalue"])
    ok = worst_asym <= SYMMETRY_LIMIT and worst_eig >= EIGEN_LIMIT
    report(3, ok, f"{len(health)} filter runs, max asymmetry {worst_asym:.3g}, min eigenvalue {worst_eig:.3g}")


def test_crit04_zero_noise_consistency(params):
    sp = SensorParams(encoder_resolution=0.0, laser_noise_sigma=0.0, interrupters_enabled=False)
    profile = human_trial_profile()
    r = simulate_closed_loop(params, sp, profile, profile.duration, modes=())
    nc = NoiseConfig(Q=np.zeros((4, 4)), R=sensor_R(sp), P0=np.zeros((4, 4)), x0=r.trial.x0)
    run = run_filter(r.trial, nc, params, Mode.FULL)
    err = float(np.max(np.abs(run.estimates - r.trial.truth)))
    report(4, err < 1e-9, f"max estimate error {err:.3g} over {profile.duration:.0f} s")


def test_crit05_jacobian_oracle(params):
    states = [np.array([0.31, 0.02, 0.30, 0.05]), np.array([0.2, -0.03, 0.23, -0.04]),
              np.array([0.4, 0.0, 0.4, 0.1])]
    slopes = [jacobian_slope(params, x) for x in states]
    ok = all(abs(s - 2.0) <= 0.2 for s in slopes)
    report(5, ok, "step-halving slopes " + ", ".join(f"{s:.3f}" for s in slopes))


def test_crit06_newton_and_symmetry(params):
    x = np.linspace(-0.2, 0.2, 1000)
    grid = np.linspace(-0.05, 0.05, 1000)
    top = lateral_magnetic_force(x, 0.0, params)
    pair = top + force_on_bottom(x, 0.0, params)
    odd_mag = np.max(np.abs(top + lateral_magnetic_force(-x, 0.0, params)))
    odd_stribeck = np.max(np.abs(stribeck_friction(grid, params) + stribeck_friction(-grid, params)))
    odd_visc = np.max(np.abs(viscous_friction(grid, params) + viscous_friction(-grid, params)))
    ok = np.all(pair == 0.0) and max(odd_mag, odd_stribeck, odd_visc) <= 1e-12
    report(6, bool(ok), f"pair sum max {np.max(np.abs(pair)):.3g}, odd defects {odd_mag:.3g}/"
                        f"{odd_stribeck:.3g}/{odd_visc:.3g}")


def test_crit07_integrator_order(params):
    s = PlantState(0.33, 0.05, 0.30, 0.1)
    dts = 2e-3 / 2.0 ** np.arange(4)
    errs = []
    for dt in dts:
        one = step(s, 2.0, dt, params).as_vector()
        two = step(step(s, 2.0, dt / 2, params), 2.0, dt / 2, params).as_vector()
        errs.append(np.linalg.norm(one - two))
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    report(7, slope >= 4.5, f"step-halving slope {slope:.3f}")


def test_crit08_recovery(recovery_run):
    result, seconds = recovery_run
    s = result.summary
    on, off = s["on"], s["off"]
    ok = (s["recovery_held"] and on["final_state"] != "detached" and off["final_state"] == "detached"
          and seconds < 30)
    back = on["recovered_after_s"]
    back = "never" if back is None else f"{back:.2f} s"
    report(8, ok, f"ON max {1000 * on['max_offset_m']:.1f} mm, back under threshold after {back}, "
                  f"ends {on['final_state']}; OFF ends {off['final_state']}; {seconds:.1f} s")


def test_crit09_trajectory_distance():
    profile = human_trial_profile()
    length = path_length(profile)
    report(9, abs(length - 6.0) <= 0.6, f"path {length:.3f} m over {profile.duration:.1f} s")


def test_crit10_dynamic_monotonicity():
    s = run_scenario(from_mapping({"scenario": "dynamic"})).summary
    weights = sorted({c["weight_kg"] for c in s["cells"]})
    ok = all(s["monotone_in_weight"].values()) and s["max_cell"] == {"rpm": 30.0, "weight_kg": weights[-1]}
    report(10, ok, f"monotone {s['monotone_in_weight']}, max cell {s['max_cell']}")


def test_crit11_rmse_oracle():
    cases = [([0.0, 0.0], [1.0, 1.0], 1.0),
             ([0.0, 2.0], [0.0, 0.0], 2.0**0.5),
             ([1.0, 2.0, 3.0, 4.0], [2.0, 2.0, 2.0, 2.0], (6 / 4) ** 0.5)]
    errs = [abs(rmse(a, b) - want) for a, b, want in cases]
    report(11, max(errs) <= 1e-12, f"max deviation {max(errs):.3g} on {len(cases)} series")


DETERMINISM_CONFIGS = [
    {"scenario": "static", "weights": [0.5, 1.0, 1.6]},
    {"scenario": "dynamic", "speeds": [10.0, 30.0], "weights": [0.0, 1.0]},
    {"scenario": "human", "duration": 20.0},
    {"scenario": "recovery"},
    {"scenario": "tune", "duration": 5.0, "estimator.grid_q_pos": [1e-7, 1e-6]},
    {"scenario": "calibrate"},
]


def test_crit12_determinism(tmp_path):
    mismatches, compared = [], 0
    for i, entries in enumerate(DETERMINISM_CONFIGS):
        cfg = from_mapping(dict(entries, seed=5))
        a = run_scenario(cfg).write(tmp_path / f"{i}a")
        b = run_scenario(cfg).write(tmp_path / f"{i}b")
        for pa, pb in zip(sorted(a), sorted(b)):
            compared += 1
            if pa.name != pb.name or pa.read_bytes() != pb.read_bytes():
                mismatches.append(f"{entries['scenario']}/{pa.name}")
    report(12, not mismatches, f"{compared} files compared across {len(DETERMINISM_CONFIGS)} scenarios"
                               + (f", differing: {mismatches}" if mismatches else ""))
