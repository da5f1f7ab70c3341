import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from magcouple.physics import (G, ParameterError, PhysicalParams, calibrate_coupling, force_on_bottom,
                               geometric_factor, lateral_magnetic_force, peak_force, peak_offset,
                               stribeck_friction, viscous_friction)

offsets = st.floats(-0.2, 0.2, allow_nan=False)
speeds = st.floats(-1.0, 1.0, allow_nan=False)


def test_geometric_factor_zero_height_is_zero():
    for d in (1e-3, 0.006, 0.05, 2.0):
        assert geometric_factor(d, 0.0) == pytest.approx(0.0, abs=1e-9 / d**2)


def test_geometric_factor_hand_value():
    # 1/0.006^2 + 1/0.026^2 - 2/0.016^2
    assert geometric_factor(0.006, 0.01) == pytest.approx(27777.78 + 1479.29 - 7812.50, abs=0.05)


def test_geometric_factor_far_limit_and_monotone():
    assert 0 <= geometric_factor(1e3, 0.01) < 1e-5
    d = np.geomspace(1e-3, 10.0, 400)
    a = geometric_factor(d, 0.01)
    assert np.all(np.diff(a) < 0)
    assert np.all(a > 0)


@pytest.mark.parametrize("d", [0.0, -0.01, float("nan")])
def test_geometric_factor_rejects_bad_gap(d):
    with pytest.raises(ParameterError):
        geometric_factor(d, 0.01)


def test_params_validation():
    with pytest.raises(ParameterError):
        PhysicalParams(radius_R=0.0)
    with pytest.raises(ParameterError):
        PhysicalParams(fric_static_Fs=0.1, fric_coulomb_Fc=0.3)
    with pytest.raises(ParameterError):
        PhysicalParams(sgn_smoothing_eps=0.0)
    p = PhysicalParams()
    assert p.coupling_Kd == pytest.approx(p.mu0 * p.magnetization_M**2 / 2)


def test_aligned_magnets_feel_no_force(params):
    assert lateral_magnetic_force(0.2, 0.2, params) == 0.0


@given(offsets)
def test_lateral_force_is_odd_and_restoring(delta):
    p = calibrate_coupling(PhysicalParams())
    f = lateral_magnetic_force(delta, 0.0, p)
    assert f == -lateral_magnetic_force(-delta, 0.0, p)
    # the follower is pulled toward the driver, never pushed away
    assert f * delta >= 0


@given(st.floats(0, 0.6), st.floats(0, 0.6))
def test_newton_third_law(p1, p2):
    p = calibrate_coupling(PhysicalParams())
    assert lateral_magnetic_force(p1, p2, p) + force_on_bottom(p1, p2, p) == 0.0


def test_force_depends_only_on_offset(params):
    a = lateral_magnetic_force(0.31, 0.30, params)
    b = lateral_magnetic_force(0.11, 0.10, params)
    assert a == pytest.approx(b, rel=1e-12)


def test_peak_force_in_detachment_window(params):
    assert 1.2 * G <= peak_force(params) <= 1.7 * G
    assert peak_force(params) == pytest.approx(1.45 * G, rel=1e-9)


def test_peak_offset_matches_fine_grid(params):
    grid = np.linspace(0, 0.1, 200001)
    f = lateral_magnetic_force(grid, 0.0, params)
    assert peak_offset(params) == pytest.approx(grid[np.argmax(f)], abs=2 * (grid[1] - grid[0]))


def test_peak_offset_independent_of_coupling():
    p = PhysicalParams()
    assert peak_offset(p) == pytest.approx(peak_offset(p.with_(coupling_Kd=p.coupling_Kd / 7)), rel=1e-7)


def test_calibration_targets_weight():
    for w in (0.5, 1.45, 3.0):
        p = calibrate_coupling(PhysicalParams(), w)
        assert peak_force(p) == pytest.approx(w * G, rel=1e-9)
    with pytest.raises(ParameterError):
        calibrate_coupling(PhysicalParams(), 0.0)


def test_stribeck_hand_value():
    p = PhysicalParams(fric_coulomb_Fc=0.5, fric_static_Fs=1.0, stribeck_vel_vs=0.01,
                       fric_viscous_Kv_top=2.0, sgn_smoothing_eps=1e-7)
    assert stribeck_friction(0.01, p) == pytest.approx(0.5 + 0.5 * math.exp(-1) + 0.02, abs=1e-6)
    assert stribeck_friction(0.0, p) == 0.0


def test_stribeck_high_speed_limit():
    p = PhysicalParams()
    for v in np.linspace(math.sqrt(5) * p.stribeck_vel_vs, 0.5, 50):
        coulomb = p.fric_coulomb_Fc + p.fric_viscous_Kv_top * v
        assert stribeck_friction(v, p) == pytest.approx(coulomb, rel=0.01)


@given(speeds)
def test_stribeck_odd_and_bounded(v):
    p = PhysicalParams()
    f = stribeck_friction(v, p)
    assert f == -stribeck_friction(-v, p)
    assert abs(f) <= p.fric_static_Fs + p.fric_viscous_Kv_top * abs(v) + 1e-12
    assert f * v >= 0


def test_viscous_friction():
    p = PhysicalParams(fric_viscous_Kv_bottom=3.0)
    assert viscous_friction(0.0, p) == 0.0
    assert viscous_friction(0.02, p) == pytest.approx(0.06)
    assert viscous_friction(0.04, p) == 2 * viscous_friction(0.02, p)
    assert viscous_friction(-0.02, p) == -viscous_friction(0.02, p)
