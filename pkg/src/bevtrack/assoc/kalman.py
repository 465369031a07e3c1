"""Constant-velocity Kalman filter on ground-plane centers.

State is ``(x, y, vx, vy)`` in meters and meters per frame; the measurement is
the ``(x, y)`` position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

# transition for dt = 1 frame
F = np.array(
    [
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)
H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])


class KalmanNumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class KalmanNoise:
    init_std_pos: float = 0.5
    init_std_vel: float = 0.5
    process_std_pos: float = 0.2
    process_std_vel: float = 0.5
    meas_std: float = 0.1

    @property
    def Q(self) -> np.ndarray:
        p, v = self.process_std_pos**2, self.process_std_vel**2
        return np.diag([p, p, v, v])

    @property
    def R(self) -> np.ndarray:
        return np.eye(2) * self.meas_std**2


DEFAULT_NOISE = KalmanNoise()


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def position(self) -> np.ndarray:
        return self.mean[:2]

    def is_spd(self, tol: float = 1e-9) -> bool:
        P = self.covariance
        if np.max(np.abs(P - P.T)) > tol:
            return False
        try:
            np.linalg.cholesky(P)
        except np.linalg.LinAlgError:
            return False
        return True


def kalman_initiate(measurement, noise: KalmanNoise = DEFAULT_NOISE) -> KalmanState:
    x, y = (float(v) for v in measurement)
    if not (np.isfinite(x) and np.isfinite(y)):
        raise ValueError(f"measurement must be finite, got ({x}, {y})")
    p, v = noise.init_std_pos**2, noise.init_std_vel**2
    return KalmanState(np.array([x, y, 0.0, 0.0]), np.diag([p, p, v, v]))


def kalman_predict(state: KalmanState, noise: KalmanNoise = DEFAULT_NOISE) -> KalmanState:
    mean = F @ state.mean
    cov = F @ state.covariance @ F.T + noise.Q
    return KalmanState(mean, 0.5 * (cov + cov.T))


def _innovation(state: KalmanState, noise: KalmanNoise):
    S = H @ state.covariance @ H.T + noise.R
    try:
        chol = cho_factor(S, lower=True, check_finite=True)
    except LinAlgError as exc:
        raise KalmanNumericalError("innovation covariance is not positive definite") from exc
    return S, chol


def kalman_update(state: KalmanState, measurement, noise: KalmanNoise = DEFAULT_NOISE) -> KalmanState:
    z = np.asarray(measurement, dtype=float)
    if z.shape != (2,) or not np.all(np.isfinite(z)):
        raise ValueError(f"measurement must be a finite (x, y), got {measurement!r}")
    P = state.covariance
    _, chol = _innovation(state, noise)
    gain = cho_solve(chol, H @ P).T  # P H^T S^-1, S symmetric
    mean = state.mean + gain @ (z - H @ state.mean)
    # Joseph form keeps the posterior symmetric positive definite
    A = np.eye(4) - gain @ H
    cov = A @ P @ A.T + gain @ noise.R @ gain.T
    return KalmanState(mean, 0.5 * (cov + cov.T))


def mahalanobis_sq(state: KalmanState, measurements, noise: KalmanNoise = DEFAULT_NOISE):
    """Squared Mahalanobis distance between the predicted position and one or more measurements.

    Returns a float for a single ``(x, y)`` and an array for an ``(k, 2)`` input.
    """
    z = np.asarray(measurements, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    _, chol = _innovation(state, noise)
    d = z - H @ state.mean
    sol = cho_solve(chol, d.T)
    out = np.maximum(np.einsum("ij,ji->i", d, sol), 0.0)
    return float(out[0]) if single else out


def innovation_mahalanobis_sq(S, residual) -> float:
    """``r^T S^-1 r`` for an explicit innovation covariance."""
    S = np.asarray(S, dtype=float)
    r = np.asarray(residual, dtype=float)
    try:
        chol = cho_factor(S, lower=True)
    except LinAlgError as exc:
        raise KalmanNumericalError("innovation covariance is not positive definite") from exc
    return float(r @ cho_solve(chol, r))
