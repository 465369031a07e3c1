"""Online two-stage association of BEV detections into tracks.

Stage 1 fuses appearance (cosine distance of ReID embeddings) with motion
(squared Mahalanobis distance to the Kalman prediction) and solves a
min-cost assignment; stage 2 retries the leftovers on plain ground-plane
distance with a looser threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..config import ConfigError, require
from ..fileio import DetectionRecord, TrackRow
from .assignment import Assignment, hungarian
from .kalman import KalmanNoise, KalmanState, kalman_initiate, kalman_predict, kalman_update, mahalanobis_sq

CHI2_95_2DOF = 5.9915


class InvalidEmbeddingError(ValueError):
    pass


class SequenceError(ValueError):
    """Frames were fed to a tracker out of order."""


@dataclass(frozen=True)
class TrackerConfig:
    lam: float = field(default=0.98, metadata={"key": "lambda"})
    tau1: float = 0.4
    tau2: float = 2.5
    max_age: int = 10
    det_threshold: float = 0.4
    gate_threshold: float = CHI2_95_2DOF
    ema_alpha: float = 0.9
    min_hits: int = 1
    init_std_pos: float = 0.5
    init_std_vel: float = 0.5
    process_std_pos: float = 0.2
    process_std_vel: float = 0.5
    meas_std: float = 0.1

    def __post_init__(self):
        require(0.0 <= self.lam <= 1.0, "lambda", f"must lie in [0, 1], got {self.lam}")
        for name in ("tau1", "tau2", "gate_threshold", "init_std_pos", "init_std_vel", "meas_std"):
            require(getattr(self, name) > 0, name, f"must be positive, got {getattr(self, name)}")
        for name in ("process_std_pos", "process_std_vel"):
            require(getattr(self, name) >= 0, name, f"must be non-negative, got {getattr(self, name)}")
        require(0.0 <= self.det_threshold < 1.0, "det_threshold", f"must lie in [0, 1), got {self.det_threshold}")
        require(0.0 <= self.ema_alpha <= 1.0, "ema_alpha", f"must lie in [0, 1], got {self.ema_alpha}")
        require(self.max_age >= 0, "max_age", f"must be non-negative, got {self.max_age}")
        require(self.min_hits >= 1, "min_hits", f"must be at least 1, got {self.min_hits}")

    @property
    def noise(self) -> KalmanNoise:
        return KalmanNoise(
            self.init_std_pos, self.init_std_vel, self.process_std_pos, self.process_std_vel, self.meas_std
        )


class TrackStatus(str, Enum):
    ACTIVE = "active"
    REMOVED = "removed"


@dataclass
class Tracklet:
    track_id: int
    state: KalmanState
    embedding: np.ndarray
    time_since_update: int = 0
    hits: int = 1
    status: TrackStatus = TrackStatus.ACTIVE

    @property
    def position(self) -> tuple[float, float]:
        return float(self.state.mean[0]), float(self.state.mean[1])


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not n > 0 or not math.isfinite(n):
        raise InvalidEmbeddingError("embedding must be a non-zero finite vector")
    return v / n


def cosine_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if not (na > 0 and nb > 0):
        raise InvalidEmbeddingError("cosine distance of a zero vector is undefined")
    if np.array_equal(a, b):
        return 0.0
    return float(np.clip(1.0 - (a @ b) / (na * nb), 0.0, 2.0))


def fused_cost(d_r: float, d_m_sq: float, config: TrackerConfig) -> float:
    """``lam * d_r + (1 - lam) * d_m_sq``, or +inf when the motion gate fires."""
    if d_m_sq > config.gate_threshold:
        return math.inf
    return config.lam * d_r + (1.0 - config.lam) * d_m_sq


def fused_cost_matrix(tracklets, detections, config: TrackerConfig) -> np.ndarray:
    n, m = len(tracklets), len(detections)
    cost = np.full((n, m), math.inf)
    if n == 0 or m == 0:
        return cost
    positions = np.array([d.position for d in detections], dtype=float)
    embeddings = np.array([_unit(d.embedding) for d in detections])
    noise = config.noise
    for i, trk in enumerate(tracklets):
        d_m = mahalanobis_sq(trk.state, positions, noise)
        d_r = np.clip(1.0 - embeddings @ trk.embedding, 0.0, 2.0)
        same = np.all(embeddings == trk.embedding, axis=1)
        d_r[same] = 0.0
        row = config.lam * d_r + (1.0 - config.lam) * d_m
        row[d_m > config.gate_threshold] = math.inf
        cost[i] = row
    return cost


def _thresholded(assignment: Assignment, cost: np.ndarray, threshold: float, rows, cols) -> Assignment:
    """Map a sub-problem assignment back to global indices and demote matches above ``threshold``."""
    matches, bad_rows, bad_cols = [], [], []
    for r, c in assignment.matches:
        if cost[r, c] > threshold:
            bad_rows.append(rows[r])
            bad_cols.append(cols[c])
        else:
            matches.append((rows[r], cols[c]))
    return Assignment(
        matches,
        sorted([rows[r] for r in assignment.unmatched_rows] + bad_rows),
        sorted([cols[c] for c in assignment.unmatched_cols] + bad_cols),
    )


def associate_frame(tracklets, detections, config: TrackerConfig) -> tuple[Assignment, Assignment]:
    """Two-stage matching of predicted tracklets to detections.

    Both returned assignments index the input lists. Stage 2 only sees what
    stage 1 left unmatched.
    """
    n, m = len(tracklets), len(detections)
    cost1 = fused_cost_matrix(tracklets, detections, config)
    stage1 = _thresholded(hungarian(cost1), cost1, config.tau1, list(range(n)), list(range(m)))

    rows, cols = stage1.unmatched_tracklets, stage1.unmatched_detections
    dist = np.full((len(rows), len(cols)), math.inf)
    if rows and cols:
        pred = np.array([tracklets[i].position for i in rows])
        dets = np.array([detections[j].position for j in cols])
        dist = np.linalg.norm(pred[:, None, :] - dets[None, :, :], axis=2)
    stage2 = _thresholded(hungarian(dist), dist, config.tau2, rows, cols)
    return stage1, stage2


class Tracker:
    """Sequential tracking state machine; feed frames in increasing order."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracklets: list[Tracklet] = []
        self.removed: list[Tracklet] = []
        self.last_frame: int | None = None
        self._next_id = 1

    def step(self, frame: int, detections) -> list[TrackRow]:
        if self.last_frame is not None and frame <= self.last_frame:
            raise SequenceError(f"frame {frame} does not follow frame {self.last_frame}")
        # frames absent from the stream are empty frames: predict and age
        if self.last_frame is not None:
            for _ in range(frame - self.last_frame - 1):
                self._advance([])
        self.last_frame = frame
        return [
            TrackRow(frame, trk.track_id, x, y, score)
            for trk, (x, y), score in self._advance(list(detections))
        ]

    def _advance(self, detections):
        cfg = self.config
        noise = cfg.noise
        for trk in self.tracklets:
            trk.state = kalman_predict(trk.state, noise)

        detections = [d for d in detections if d.score > cfg.det_threshold]
        stage1, stage2 = associate_frame(self.tracklets, detections, cfg)

        emitted = []
        matched = set()
        for ti, di in stage1.matches + stage2.matches:
            trk, det = self.tracklets[ti], detections[di]
            trk.state = kalman_update(trk.state, det.position, noise)
            a = cfg.ema_alpha
            trk.embedding = _unit(a * trk.embedding + (1.0 - a) * _unit(det.embedding))
            trk.time_since_update = 0
            trk.hits += 1
            matched.add(ti)
            if trk.hits >= cfg.min_hits:
                emitted.append((trk, trk.position, det.score))

        survivors = []
        for ti, trk in enumerate(self.tracklets):
            if ti not in matched:
                trk.time_since_update += 1
                if trk.time_since_update > cfg.max_age:
                    trk.status = TrackStatus.REMOVED
                    self.removed.append(trk)
                    continue
            survivors.append(trk)

        for di in stage2.unmatched_detections:
            det = detections[di]
            trk = Tracklet(self._next_id, kalman_initiate(det.position, noise), _unit(det.embedding))
            self._next_id += 1
            survivors.append(trk)
            if trk.hits >= cfg.min_hits:
                emitted.append((trk, trk.position, det.score))

        self.tracklets = survivors
        emitted.sort(key=lambda e: e[0].track_id)
        return emitted


def tracker_step(tracker: Tracker, frame: int, detections) -> list[TrackRow]:
    return tracker.step(frame, detections)


def run_tracker(detections_by_frame: dict[int, list[DetectionRecord]], config: TrackerConfig | None = None) -> list[TrackRow]:
    tracker = Tracker(config)
    rows: list[TrackRow] = []
    for frame in sorted(detections_by_frame):
        rows.extend(tracker.step(frame, detections_by_frame[frame]))
    return rows


__all__ = [
    "CHI2_95_2DOF",
    "ConfigError",
    "InvalidEmbeddingError",
    "SequenceError",
    "Tracker",
    "TrackerConfig",
    "Tracklet",
    "TrackStatus",
    "associate_frame",
    "cosine_distance",
    "fused_cost",
    "fused_cost_matrix",
    "run_tracker",
    "tracker_step",
]
