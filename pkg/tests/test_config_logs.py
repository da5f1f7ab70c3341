import math
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from magcouple.estimator import NoiseConfig
from magcouple.harness.config import (ConfigError, format_noise, from_mapping, load_config, parse_text,
                                      write_noise_file, write_params_file)
from magcouple.harness.logs import COLUMNS, LogFormatError, LogRecord, read_log, write_log
from magcouple.physics import PhysicalParams


def _write(tmp_path, text, name="trial.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_config_takes_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, 'scenario = "static"\n'))
    assert cfg.scenario == "static" and cfg.seed == 0
    assert cfg.physics.coupling_Kd > 0
    assert cfg.sensing.rng_seed == 0


def test_config_values_and_comments(tmp_path):
    text = """
    # a comment
    scenario = human   # bare word
    seed = 4
    weights = [0.5, 1.0]
    sensing.laser_noise_sigma = 0.002
    output = "runs/#1"
    """
    cfg = load_config(_write(tmp_path, text))
    assert cfg.scenario == "human" and cfg.seed == 4
    assert cfg.weights == (0.5, 1.0)
    assert cfg.sensing.laser_noise_sigma == 0.002 and cfg.sensing.rng_seed == 4
    assert cfg.output == "runs/#1"


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigError, match=r"trial.cfg:2: unknown key 'physics.radius'"):
        load_config(_write(tmp_path, 'scenario = "static"\nphysics.radius = 0.01\n'))


@pytest.mark.parametrize("text, pattern", [
    ('scenario = "static"\nnot a pair\n', r":2: expected 'key = value'"),
    ('scenario = "static"\nseed =\n', r":2: missing value"),
    ('scenario = "static"\nseed = 1\nseed = 2\n', r":3: duplicate key 'seed'"),
    ('scenario = "static"\nseed = 1.5\n', r"seed expects"),
    ('scenario = "flying"\n', r"unknown scenario"),
    ('seed = 1\n', r"missing required key 'scenario'"),
    ('scenario = "static"\nphysics.radius_R = -1.0\n', r"radius_R must be positive"),
])
def test_config_errors(tmp_path, text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        load_config(_write(tmp_path, text))


def test_missing_config_and_referenced_file(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "nope.cfg")
    with pytest.raises(ConfigError, match="referenced file"):
        load_config(_write(tmp_path, 'scenario = "static"\nphysics_file = "missing.cfg"\n'))


def test_params_file_round_trip(tmp_path, params):
    write_params_file(params, tmp_path / "physics.cfg", header="fitted")
    cfg = load_config(_write(tmp_path, 'scenario = "static"\nphysics_file = "physics.cfg"\n'))
    assert cfg.physics == params


def test_main_file_overrides_referenced_file(tmp_path, params):
    write_params_file(params, tmp_path / "physics.cfg")
    cfg = load_config(_write(tmp_path, 'scenario = "static"\nphysics_file = "physics.cfg"\n'
                                       'physics.mass_top_m2 = 0.4\n'))
    assert cfg.physics.mass_top_m2 == 0.4
    assert cfg.physics.coupling_Kd == params.coupling_Kd


def test_noise_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 4))
    nc = NoiseConfig(Q=np.diag([1e-7, 3e-4, 1e-7, 2e-2]), R=np.eye(2), P0=a @ a.T)
    write_noise_file(nc, tmp_path / "noise.cfg", r_scale=0.5)
    cfg = load_config(_write(tmp_path, 'scenario = "human"\nnoise_file = "noise.cfg"\n'))
    back = cfg.estimator.noise_config(cfg.sensing)
    assert np.array_equal(back.Q, nc.Q)
    assert np.array_equal(back.P0, nc.P0)
    assert cfg.estimator.r_scale == 0.5


def test_noise_file_rejects_non_diagonal_Q():
    Q = np.eye(4)
    Q[0, 1] = Q[1, 0] = 0.1
    with pytest.raises(ValueError):
        format_noise(NoiseConfig(Q=Q, R=np.eye(2), P0=np.eye(4)))


def test_noise_file_only_accepts_estimator_keys(tmp_path):
    _write(tmp_path, "physics.mass_top_m2 = 0.4\n", "noise.cfg")
    with pytest.raises(ConfigError, match="only estimator"):
        load_config(_write(tmp_path, 'scenario = "human"\nnoise_file = "noise.cfg"\n'))


def test_from_mapping_and_parse_text():
    entries = parse_text("scenario = calibrate\ntrial.calibration_weight = 1.2\n")
    assert entries["trial.calibration_weight"] == (1.2, "<string>:2")
    cfg = from_mapping({"scenario": "calibrate", "trial.calibration_weight": 1.2})
    assert cfg.trial.calibration_weight == 1.2


def _record(t, rng):
    v = rng.standard_normal(12)
    return LogRecord(t, *map(float, v), int(rng.integers(0, 2)),
                     ("attached", "separating", "detached")[int(rng.integers(0, 3))])


def test_log_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(5)
    records = [_record(0.01 * k, rng) for k in range(1000)]
    path = write_log(records, tmp_path / "log.csv")
    assert path.read_text().splitlines()[0] == ",".join(COLUMNS)
    assert read_log(path) == records


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_log_float_round_trip(x):
    rec = LogRecord(0.0, x, *([0.0] * 11), 0, "attached")
    with tempfile.TemporaryDirectory() as d:
        assert read_log(write_log([rec], Path(d) / "l.csv"))[0].x1 == x


def test_log_keeps_nan(tmp_path):
    rec = LogRecord(0.0, *([math.nan] * 12), 0, "attached")
    back = read_log(write_log([rec], tmp_path / "l.csv"))[0]
    assert math.isnan(back.xh1)


@pytest.mark.parametrize("mutate, pattern", [
    (lambda lines: ["t,x1"] + lines[1:], r":1: expected header"),
    (lambda lines: lines[:2] + [lines[2] + ",9"], r":3: expected 15 fields"),
    (lambda lines: lines[:2] + [lines[2].replace("attached", "floating", 1)], r":3: bad value"),
    (lambda lines: lines[:1] + [lines[2], lines[1]], r":3: time goes backwards"),
])
def test_log_format_errors(tmp_path, mutate, pattern):
    recs = [LogRecord(0.0, *([0.0] * 12), 0, "attached"), LogRecord(0.01, *([0.0] * 12), 0, "attached")]
    path = write_log(recs, tmp_path / "l.csv")
    path.write_text("\n".join(mutate(path.read_text().splitlines())) + "\n")
    with pytest.raises(LogFormatError, match=pattern):
        read_log(path)
