"""Tracklet association: Hungarian assignment, constant-velocity Kalman filter and the two-stage tracker."""

from .assignment import Assignment, hungarian, total_cost
from .kalman import (
    KalmanNoise,
    KalmanNumericalError,
    KalmanState,
    innovation_mahalanobis_sq,
    kalman_initiate,
    kalman_predict,
    kalman_update,
    mahalanobis_sq,
)
from .tracker import (
    CHI2_95_2DOF,
    InvalidEmbeddingError,
    SequenceError,
    Tracker,
    TrackerConfig,
    Tracklet,
    TrackStatus,
    associate_frame,
    cosine_distance,
    fused_cost,
    fused_cost_matrix,
    run_tracker,
    tracker_step,
)

__all__ = [
    "Assignment",
    "CHI2_95_2DOF",
    "InvalidEmbeddingError",
    "KalmanNoise",
    "KalmanNumericalError",
    "KalmanState",
    "SequenceError",
    "TrackStatus",
    "Tracker",
    "TrackerConfig",
    "Tracklet",
    "associate_frame",
    "cosine_distance",
    "fused_cost",
    "fused_cost_matrix",
    "hungarian",
    "innovation_mahalanobis_sq",
    "kalman_initiate",
    "kalman_predict",
    "kalman_update",
    "mahalanobis_sq",
    "run_tracker",
    "total_cost",
    "tracker_step",
]
