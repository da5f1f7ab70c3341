"""Simulation and state estimation for a magnetically coupled driver-follower actuator.

A motor-driven bottom magnet drags a top magnet (the armrest) through a
non-magnetic casing. The package models the lateral coupling force and
friction, integrates the two-body plant, simulates the encoder and laser
sensors, and estimates both magnets' states with an extended Kalman filter.
"""

from .control import (DetachState, RecoveryConfig, TrajectoryProfile, commanded_motion,
                      detachment_check, human_trial_profile, motor_force, offset_recovery,
                      rpm_to_speed)
from .estimator import (EstimatorDivergence, EstimatorState, ExtendedKalmanFilter, NoiseConfig,
                        observability_rank, predict, rmse, transition_jacobian, tune_offline, update)
from .physics import (PhysicalParams, ParameterError, calibrate_coupling, geometric_factor,
                      lateral_magnetic_force, peak_force, peak_offset, stribeck_friction,
                      viscous_friction)
from .plant import Disturbance, DisturbanceEvent, IntegrationError, PlantState, derivatives, step
from .sensing import Measurement, Mode, SensorParams, measure

__all__ = [
    "DetachState", "RecoveryConfig", "TrajectoryProfile", "commanded_motion", "detachment_check",
    "human_trial_profile", "motor_force", "offset_recovery", "rpm_to_speed",
    "EstimatorDivergence", "EstimatorState", "ExtendedKalmanFilter", "NoiseConfig",
    "observability_rank", "predict", "rmse", "transition_jacobian", "tune_offline", "update",
    "PhysicalParams", "ParameterError", "calibrate_coupling", "geometric_factor",
    "lateral_magnetic_force", "peak_force", "peak_offset", "stribeck_friction", "viscous_friction",
    "Disturbance", "DisturbanceEvent", "IntegrationError", "PlantState", "derivatives", "step",
    "Measurement", "Mode", "SensorParams", "measure",
]
