"""Extended Kalman filter over the magnet plant.

The filter propagates its estimate with the same RK4 integrator as the
simulated plant, and linearizes the resulting one-step map by central finite
differences. A control period may span several integrator steps, in which
case the motor force is passed as one value per step.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .physics import PhysicalParams
from .sensing import Measurement, Mode, SensorParams

SYMMETRY_TOL = 1e-12
PSD_TOL = -1e-10


class EstimatorDivergence(FloatingPointError):
    """The estimate or covariance became non-finite or indefinite."""


@dataclass(frozen=True)
class NoiseConfig:
    """Process/measurement noise and the filter's initial conditions.

    ``R`` may be 2x2 (encoder, laser); partial-mode runs use its top-left
    entry. A 1x1 ``R`` only supports partial mode.
    """

    Q: np.ndarray
    R: np.ndarray
    P0: np.ndarray
    x0: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        for name in ("Q", "R", "P0"):
            m = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, m)
            if not np.allclose(m, m.T, rtol=0, atol=1e-15):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(m).min() < PSD_TOL:
                raise ValueError(f"{name} must be positive semidefinite")
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(4))
        if self.Q.shape != (4, 4) or self.P0.shape != (4, 4):
            raise ValueError("Q and P0 must be 4x4")
        if self.R.shape not in ((1, 1), (2, 2)):
            raise ValueError(f"R must be 1x1 or 2x2, got {self.R.shape}")
        if np.linalg.eigvalsh(self.R).min() <= 0:
            raise ValueError("R must be positive definite")

    def R_for(self, mode: Mode) -> np.ndarray:
        mode = Mode(mode)
        if mode.dim > self.R.shape[0]:
            raise ValueError(f"{mode.value} mode needs a {mode.dim}x{mode.dim} R")
        return self.R[: mode.dim, : mode.dim]

    def with_(self, **changes) -> NoiseConfig:
        return replace(self, **changes)


def sensor_R(sp: SensorParams, scale: float = 1.0, floor: float = 1e-12) -> np.ndarray:
    """Measurement covariance implied by the sensor model."""
    enc = sp.encoder_resolution**2 / 12.0
    laser = sp.laser_noise_sigma**2
    return scale * np.diag([max(enc, floor), max(laser, floor)])


def default_noise_config(sp: SensorParams | None = None, x0=None) -> NoiseConfig:
    sp = sp or SensorParams()
    return NoiseConfig(
        Q=np.diag([1e-12, 1e-6, 1e-12, 1e-4]),
        R=sensor_R(sp),
        P0=np.diag([1e-8, 1e-6, 1e-6, 1e-6]),
        x0=np.zeros(4) if x0 is None else x0,
    )


@dataclass(frozen=True)
class EstimatorState:
    x_hat: np.ndarray
    P: np.ndarray
    t: float = 0.0

    @classmethod
    def initial(cls, nc: NoiseConfig, t: float = 0.0) -> EstimatorState:
        return cls(nc.x0.copy(), nc.P0.copy(), t)


def _u_sequence(u) -> np.ndarray:
    return np.atleast_1d(np.asarray(u, dtype=float))


def _no_dist() -> np.ndarray:
    return np.zeros(_kernels.N_DIST)


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def check_covariance(P: np.ndarray, where: str = "") -> None:
    if not np.all(np.isfinite(P)):
        raise EstimatorDivergence(f"non-finite covariance {where}")
    asym = np.max(np.abs(P - P.T))
    if asym > SYMMETRY_TOL:
        raise EstimatorDivergence(f"covariance asymmetric by {asym:.3g} {where}")
    lam = np.linalg.eigvalsh(P).min()
    if lam < PSD_TOL:
        raise EstimatorDivergence(f"covariance indefinite (min eigenvalue {lam:.3g}) {where}")


def transition_jacobian(x_hat, u, dt: float, params: PhysicalParams, pvec=None) -> np.ndarray:
    """Jacobian of the discrete one-step map, by central differences.

    ``u`` holds one motor force per integrator step of length ``dt``.
    """
    if pvec is None:
        pvec = params.as_vector()
    return _kernels.fd_jacobian(np.asarray(x_hat, dtype=float), _u_sequence(u), float(dt), pvec, _no_dist())


def predict(est: EstimatorState, u, dt: float, params: PhysicalParams, nc: NoiseConfig,
            pvec=None) -> EstimatorState:
    """Propagate the estimate through the plant and the covariance through its Jacobian."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if pvec is None:
        pvec = params.as_vector()
    u_seq = _u_sequence(u)
    x = _kernels.propagate(est.x_hat, u_seq, float(dt), pvec, _no_dist())
    if not np.all(np.isfinite(x)):
        raise EstimatorDivergence(f"state propagation blew up at t={est.t} from {est.x_hat}")
    F = _kernels.fd_jacobian(est.x_hat, u_seq, float(dt), pvec, _no_dist())
    P = _symmetrize(F @ est.P @ F.T + nc.Q)
    if not np.all(np.isfinite(P)):
        raise EstimatorDivergence(f"covariance propagation blew up at t={est.t}")
    return EstimatorState(x, P, est.t + dt * len(u_seq))


def measurement_matrix(mode: Mode) -> np.ndarray:
    if Mode(mode) is Mode.FULL:
        return np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
    return np.array([[1.0, 0.0, 0.0, 0.0]])


def update(est: EstimatorState, z: Measurement, nc: NoiseConfig) -> EstimatorState:
    """Kalman-gain correction with a position measurement."""
    H = measurement_matrix(z.mode)
    R = nc.R_for(z.mode)
    S = H @ est.P @ H.T + R
    try:
        K = np.linalg.solve(S, H @ est.P).T
    except np.linalg.LinAlgError as exc:
        raise EstimatorDivergence(
            f"singular innovation covariance at t={est.t}: S={S.tolist()}, cond={np.linalg.cond(S):.3g}"
        ) from exc
    innovation = z.z - H @ est.x_hat
    x = est.x_hat + K @ innovation
    P = _symmetrize((np.eye(4) - K @ H) @ est.P)
    lam = np.linalg.eigvalsh(P).min()
    if lam < PSD_TOL or not np.all(np.isfinite(x)):
        raise EstimatorDivergence(f"update lost positive semidefiniteness at t={est.t} (min eigenvalue {lam:.3g})")
    return EstimatorState(x, P, est.t)


@dataclass(frozen=True)
class ObservabilityReport:
    rank: int
    singular_values: np.ndarray
    tol: float

    @property
    def smallest_singular_value(self) -> float:
        return float(self.singular_values[-1])

    @property
    def condition(self) -> float:
        s = self.singular_values
        return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


def observability_matrix(F: np.ndarray, H: np.ndarray) -> np.ndarray:
    blocks = [H]
    for _ in range(F.shape[0] - 1):
        blocks.append(blocks[-1] @ F)
    return np.vstack(blocks)


def observability_rank(x_lin, u, dt: float, params: PhysicalParams, mode: Mode,
                       rtol: float | None = None) -> ObservabilityReport:
    """Rank of the local observability matrix of the linearized one-step map."""
    F = transition_jacobian(x_lin, u, dt, params)
    O = observability_matrix(F, measurement_matrix(mode))
    s = np.linalg.svd(O, compute_uv=False)
    if rtol is None:
        rtol = max(O.shape) * np.finfo(float).eps
    tol = rtol * s[0]
    return ObservabilityReport(int(np.sum(s > tol)), s, tol)


def rmse(estimates, truth) -> float:
    """Root mean square error between two equal-length series."""
    est = np.asarray(estimates, dtype=float).ravel()
    tru = np.asarray(truth, dtype=float).ravel()
    if est.shape != tru.shape:
        raise ValueError(f"length mismatch: {est.shape[0]} estimates vs {tru.shape[0]} truth values")
    if est.size == 0:
        raise ValueError("rmse needs at least one value")
    return float(np.sqrt(np.mean((est - tru) ** 2)))


@dataclass(frozen=True)
class LoggedTrial:
    """Ground truth and sensor history of one run, sampled once per control period.

    ``u[k]`` holds the motor forces applied during period ``k`` (one per
    integrator step), ``z[k]`` the full measurement taken at its end and
    ``truth[k]`` the true state at that instant.
    """

    dt: float
    u: np.ndarray
    z: np.ndarray
    truth: np.ndarray
    x0: np.ndarray
    t0: float = 0.0


@dataclass
class FilterRun:
    estimates: np.ndarray
    P_final: np.ndarray
    max_asymmetry: float = 0.0
    min_eigenvalue: float = np.inf

    def position_rmse_cm(self, truth: np.ndarray) -> tuple[float, float]:
        return (rmse(100 * self.estimates[:, 0], 100 * truth[:, 0]),
                rmse(100 * self.estimates[:, 2], 100 * truth[:, 2]))


class ExtendedKalmanFilter:
    """Stateful wrapper running predict/update once per control period."""

    def __init__(self, params: PhysicalParams, nc: NoiseConfig, mode: Mode = Mode.FULL,
                 t0: float = 0.0, track_health: bool = True):
        self.params = params
        self.nc = nc
        self.mode = Mode(mode)
        self.state = EstimatorState.initial(nc, t0)
        self.track_health = track_health
        self.max_asymmetry = 0.0
        self.min_eigenvalue = np.inf
        self._pvec = params.as_vector()
        self._steps = 0

    @property
    def x_hat(self) -> np.ndarray:
        return self.state.x_hat

    def _health(self, P):
        if self.track_health:
            self.max_asymmetry = max(self.max_asymmetry, float(np.max(np.abs(P - P.T))))
            self.min_eigenvalue = min(self.min_eigenvalue, float(np.linalg.eigvalsh(P).min()))

    def step(self, u, dt: float, z: Measurement) -> np.ndarray:
        try:
            self.state = predict(self.state, u, dt, self.params, self.nc, pvec=self._pvec)
            self._health(self.state.P)
            if z.mode is not self.mode:
                raise ValueError(f"filter in {self.mode.value} mode got a {z.mode.value} measurement")
            self.state = update(self.state, z, self.nc)
            self._health(self.state.P)
        except EstimatorDivergence as exc:
            raise EstimatorDivergence(f"step {self._steps}: {exc}") from exc
        self._steps += 1
        return self.state.x_hat


def run_filter(trial: LoggedTrial, nc: NoiseConfig, params: PhysicalParams,
               mode: Mode = Mode.FULL) -> FilterRun:
    mode = Mode(mode)
    ekf = ExtendedKalmanFilter(params, nc, mode, t0=trial.t0)
    out = np.empty((len(trial.u), 4))
    for k, (u_k, z_k) in enumerate(zip(trial.u, trial.z)):
        z = Measurement(z_k[: mode.dim], mode, ekf.state.t + trial.dt * len(u_k))
        out[k] = ekf.step(u_k, trial.dt, z)
    return FilterRun(out, ekf.state.P, ekf.max_asymmetry, ekf.min_eigenvalue)


def diagonal_grid(q_pos: Iterable[float], q_vel_bottom: Iterable[float], q_vel_top: Iterable[float],
                  r_scale: Iterable[float], sp: SensorParams, P0=None, x0=None) -> list[NoiseConfig]:
    """Cartesian grid of diagonal Q and sensor-scaled R, in a fixed order."""
    P0 = default_noise_config(sp).P0 if P0 is None else P0
    x0 = np.zeros(4) if x0 is None else x0
    grid = []
    for qp, qb, qt, rs in itertools.product(q_pos, q_vel_bottom, q_vel_top, r_scale):
        grid.append(NoiseConfig(Q=np.diag([qp, qb, qp, qt]), R=sensor_R(sp, rs), P0=P0, x0=x0))
    return grid


@dataclass
class TuneResult:
    noise: NoiseConfig
    score: float
    scores: list[float]
    index: int


def tune_offline(trials: Sequence[LoggedTrial], grid: Sequence[NoiseConfig], params: PhysicalParams,
                 mode: Mode = Mode.FULL) -> TuneResult:
    """Pick the grid point with the smallest summed bottom+top position RMSE.

    The winner's final covariance is returned as its ``P0`` so a closed-loop
    filter starts from the converged value. Ties go to the earlier grid point.
    """
    if not grid:
        raise ValueError("empty tuning grid")
    if not trials:
        raise ValueError("need at least one logged trial")
    best = None
    scores = []
    for i, nc in enumerate(grid):
        total = 0.0
        last = None
        for trial in trials:
            run = run_filter(trial, nc.with_(x0=trial.x0), params, mode)
            rb, rt = run.position_rmse_cm(trial.truth)
            total += rb + rt
            last = run
        scores.append(total)
        if best is None or total < best[0]:
            best = (total, i, last.P_final)
    score, index, P_final = best
    tuned = grid[index].with_(P0=_symmetrize(P_final))
    return TuneResult(tuned, score, scores, index)
