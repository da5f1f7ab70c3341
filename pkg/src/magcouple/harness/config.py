"""Trial configuration: a flat ``key = value`` text format with dotted sections.

Example::

    # static detachment sweep
    scenario = "static"
    seed = 3
    weights = [0.0, 0.5, 1.0, 1.5]
    physics.separation_d = 0.02
    sensing.laser_noise_sigma = 0.002

Values are Python literals (numbers, strings, lists, ``True``/``False``,
``None``); a bare word is read as a string. ``#`` starts a comment.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..estimator import NoiseConfig, diagonal_grid, sensor_R
from ..physics import PhysicalParams, calibrate_coupling
from ..sensing import SensorParams

SCENARIOS = ("static", "dynamic", "human", "recovery", "tune", "calibrate")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorSettings:
    # defaults are the result of the tune scenario at its default settings
    q_pos: float = 1e-7
    q_vel_bottom: float = 1e-4
    q_vel_top: float = 1e-2
    r_scale: float = 0.5
    P0: tuple[float, ...] = (1e-8, 1e-6, 1e-6, 1e-6)
    # tuning grid
    grid_q_pos: tuple[float, ...] = (1e-7, 1e-6, 1e-5, 1e-4)
    grid_q_vel_bottom: tuple[float, ...] = (1e-4,)
    grid_q_vel_top: tuple[float, ...] = (1e-4, 1e-3, 1e-2)
    grid_r_scale: tuple[float, ...] = (0.5, 1.0, 2.0)

    def noise_config(self, sp: SensorParams, x0=None) -> NoiseConfig:
        P0 = np.asarray(self.P0, dtype=float)
        if P0.size == 4:
            P0 = np.diag(P0)
        elif P0.size == 16:
            P0 = P0.reshape(4, 4)
        else:
            raise ConfigError(f"estimator.P0 needs 4 (diagonal) or 16 values, got {P0.size}")
        return NoiseConfig(
            Q=np.diag([self.q_pos, self.q_vel_bottom, self.q_pos, self.q_vel_top]),
            R=sensor_R(sp, self.r_scale),
            P0=P0,
            x0=np.zeros(4) if x0 is None else x0,
        )

    def grid(self, sp: SensorParams) -> list[NoiseConfig]:
        return diagonal_grid(self.grid_q_pos, self.grid_q_vel_bottom, self.grid_q_vel_top,
                             self.grid_r_scale, sp, P0=self.noise_config(sp).P0)


@dataclass(frozen=True)
class ControlSettings:
    motor_gain: float = 500.0
    u_max: float = 50.0
    position_gain: float = 2.0
    speed_limit: float = 0.05
    recovery_threshold: float | None = None  # None: half the peak-force offset
    recovery_gain: float = 60.0
    max_recovery_speed: float = 0.05
    recovery_mode: str = "full"


@dataclass(frozen=True)
class TrialSettings:
    dt: float = 1e-3
    substeps: int = 10
    calibration_weight: float = 1.45
    # static sweep
    static_ramp: float = 1.0
    static_hold: float = 1.0
    static_settle_speed: float = 1e-3  # the smooth-sign stick band allows eps-level creep
    # dynamic sweep
    dynamic_start: float = 0.0
    dynamic_span: float = 0.60
    dynamic_dwell: float = 0.5
    # human trial
    start_position: float = 0.10
    span: float = 0.30
    dwell: float = 1.5
    ramp_time: float = 0.1
    cycles: tuple[int, ...] = (4, 6)
    hand_force_sigma: float = 3.0
    drive_force_sigma: float = 1.0
    load_knot_spacing: float = 1.0
    # recovery demo
    pulse_start: float = 4.0
    pulse_duration: float = 6.0
    pulse_resistance: float | None = None  # None: twice the peak coupling force
    recovery_window: float = 5.0
    # tuning
    tune_trials: int = 2
    tune_duration: float = 30.0


SECTIONS = {
    "physics": PhysicalParams,
    "sensing": SensorParams,
    "estimator": EstimatorSettings,
    "control": ControlSettings,
    "trial": TrialSettings,
}
TOP_LEVEL = ("scenario", "seed", "duration", "output", "mode", "weights", "speeds", "physics_file", "noise_file")


@dataclass(frozen=True)
class TrialConfig:
    scenario: str
    seed: int = 0
    duration: float | None = None
    output: str = "out"
    mode: str = "both"
    weights: tuple[float, ...] | None = None
    speeds: tuple[float, ...] | None = None
    physics: PhysicalParams = None
    sensing: SensorParams = field(default_factory=SensorParams)
    estimator: EstimatorSettings = field(default_factory=EstimatorSettings)
    control: ControlSettings = field(default_factory=ControlSettings)
    trial: TrialSettings = field(default_factory=TrialSettings)
    source: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {', '.join(SCENARIOS)}")
        if self.physics is None:
            object.__setattr__(self, "physics",
                               calibrate_coupling(PhysicalParams(), self.trial.calibration_weight))
        if self.weights is not None and any(w < 0 for w in self.weights):
            raise ConfigError("weights must be >= 0")
        if self.duration is not None and not self.duration > 0:
            raise ConfigError("duration must be > 0")
        if self.mode not in ("full", "partial", "both"):
            raise ConfigError(f"mode must be full, partial or both, got {self.mode!r}")
        # the trial seed drives the sensor noise stream
        object.__setattr__(self, "sensing", replace(self.sensing, rng_seed=self.seed))

    def with_(self, **changes) -> TrialConfig:
        return replace(self, **changes)


def _parse_value(raw: str, where: str) -> Any:
    raw = raw.strip()
    if raw == "":
        raise ConfigError(f"{where}: missing value")
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        if raw.replace("_", "").replace("-", "").replace(".", "").isalnum():
            return raw
        raise ConfigError(f"{where}: cannot parse value {raw!r}") from None


def _strip_comment(line: str) -> str:
    quote = None
    for i, c in enumerate(line):
        if quote:
            if c == quote:
                quote = None
        elif c in "'\"":
            quote = c
        elif c == "#":
            return line[:i]
    return line


def parse_text(text: str, source: str = "<string>") -> dict[str, tuple[Any, str]]:
    """Return ``{key: (value, location)}`` for a config document."""
    out: dict[str, tuple[Any, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        where = f"{source}:{lineno}"
        stripped = _strip_comment(line).strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{where}: expected 'key = value', got {line.strip()!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if not key or any(c.isspace() for c in key):
            raise ConfigError(f"{where}: bad key {key!r}")
        if key in out:
            raise ConfigError(f"{where}: duplicate key {key!r} (first set at {out[key][1]})")
        out[key] = (_parse_value(raw, where), where)
    return out


def _coerce(cls, name: str, value: Any, where: str) -> Any:
    ftype = {f.name: f.type for f in fields(cls)}[name]
    if value is None:
        return None
    try:
        if "tuple" in str(ftype):
            items = value if isinstance(value, (list, tuple)) else [value]
            return tuple(int(v) if "int" in str(ftype) else float(v) for v in items)
        if "bool" in str(ftype):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if "int" in str(ftype) and "float" not in str(ftype):
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if "float" in str(ftype):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if "str" in str(ftype):
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: {name} expects {ftype}, got {value!r}") from None
    return value


def from_mapping(entries: Mapping[str, Any], base_dir: Path | None = None,
                 source: str | None = None) -> TrialConfig:
    """Build a TrialConfig from flat dotted keys.

    ``entries`` values may be bare values or ``(value, location)`` pairs as
    returned by :func:`parse_text`.
    """
    sections: dict[str, dict[str, Any]] = {name: {} for name in SECTIONS}
    top: dict[str, Any] = {}
    base_dir = base_dir or Path.cwd()

    def unpack(key, item):
        if isinstance(item, tuple) and len(item) == 2 and isinstance(item[1], str) and ":" in item[1]:
            return item
        return item, f"key {key!r}"

    flat = dict(entries)
    # referenced parameter files are merged first so the main file wins
    for ref_key, allowed in (("physics_file", "physics"), ("noise_file", "estimator")):
        if ref_key in flat:
            value, where = unpack(ref_key, flat[ref_key])
            path = Path(value)
            if not path.is_absolute():
                path = base_dir / path
            if not path.is_file():
                raise ConfigError(f"{where}: referenced file {str(path)!r} does not exist")
            for k, item in parse_text(path.read_text(), str(path)).items():
                if not k.startswith(allowed + "."):
                    raise ConfigError(f"{item[1]}: only {allowed}.* keys are allowed in {ref_key}, got {k!r}")
                flat.setdefault(k, item)

    for key, item in flat.items():
        value, where = unpack(key, item)
        if "." in key:
            section, name = key.split(".", 1)
            cls = SECTIONS.get(section)
            if cls is None or name not in {f.name for f in fields(cls)} or name == "rng_seed":
                raise ConfigError(f"{where}: unknown key {key!r}")
            sections[section][name] = _coerce(cls, name, value, where)
        else:
            if key not in TOP_LEVEL:
                raise ConfigError(f"{where}: unknown key {key!r}")
            top[key] = value

    if "scenario" not in top:
        raise ConfigError(f"{source or 'config'}: missing required key 'scenario'")
    kwargs: dict[str, Any] = {"scenario": str(top["scenario"]), "source": source}
    if "seed" in top:
        kwargs["seed"] = _coerce(TrialConfig, "seed", top["seed"], "key 'seed'")
    if "duration" in top:
        kwargs["duration"] = _coerce(TrialConfig, "duration", top["duration"], "key 'duration'")
    for key in ("output", "mode"):
        if key in top:
            kwargs[key] = str(top[key])
    for key in ("weights", "speeds"):
        if key in top:
            kwargs[key] = _coerce(TrialConfig, key, top[key], f"key {key!r}")

    try:
        trial = TrialSettings(**sections["trial"])
        kwargs["trial"] = trial
        kwargs["sensing"] = SensorParams(**sections["sensing"])
        kwargs["estimator"] = EstimatorSettings(**sections["estimator"])
        kwargs["control"] = ControlSettings(**sections["control"])
        phys = PhysicalParams(**sections["physics"])
        if "coupling_Kd" not in sections["physics"]:
            phys = calibrate_coupling(phys, trial.calibration_weight)
        kwargs["physics"] = phys
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source or 'config'}: {exc}") from exc
    return TrialConfig(**kwargs)


def load_config(path) -> TrialConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {str(path)!r} does not exist")
    entries = parse_text(path.read_text(), str(path))
    return from_mapping(entries, base_dir=path.parent, source=str(path))


def _literal(value) -> str:
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_literal(v) for v in value) + "]"
    return repr(value)


def format_section(section: str, obj) -> str:
    lines = []
    for f in fields(obj):
        if section == "sensing" and f.name == "rng_seed":
            continue
        if section == "physics" and f.name == "mu0":
            continue
        lines.append(f"{section}.{f.name} = {_literal(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def write_params_file(params: PhysicalParams, path, header: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = "".join(f"# {line}\n" for line in header.splitlines()) + format_section("physics", params)
    path.write_text(text)
    return path


def format_noise(nc: NoiseConfig, r_scale: float = 1.0, header: str = "") -> str:
    """Render a diagonal-Q noise config as ``estimator.*`` lines."""
    Q = [float(q) for q in np.diag(nc.Q)]
    if not np.array_equal(nc.Q, np.diag(Q)):
        raise ValueError("only diagonal Q can be written")
    if Q[0] != Q[2]:
        raise ValueError("the config format shares one position noise between both magnets")
    lines = [f"# {line}" for line in header.splitlines()]
    lines += [
        f"estimator.q_pos = {Q[0]!r}",
        f"estimator.q_vel_bottom = {Q[1]!r}",
        f"estimator.q_vel_top = {Q[3]!r}",
        f"estimator.r_scale = {float(r_scale)!r}",
        f"estimator.P0 = {_literal(nc.P0.ravel())}",
    ]
    return "\n".join(lines) + "\n"


def write_noise_file(nc: NoiseConfig, path, r_scale: float = 1.0, header: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_noise(nc, r_scale, header))
    return path
