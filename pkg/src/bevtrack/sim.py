"""Deterministic multi-camera pedestrian scenarios and a parametric detection oracle.

The oracle stands in for a learned BEV detector: a pedestrian is detected
when at least one camera sees it, with configurable misses, occlusion,
localization noise, false positives and embedding noise.

All randomness comes from Philox (counter-based) generators keyed by
``(seed, stream name, indices...)``, so each frame and each camera draws
from its own substream and results do not depend on evaluation order.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .config import require
from .fileio import EMBEDDING_DIM, DetectionRecord
from .geometry import (
    EPS,
    CameraExtrinsics,
    CameraIntrinsics,
    CameraModel,
    GroundGrid,
    compose_projection,
)

OCCLUSION_RADIUS_PX = 40.0
CAMERA_HEIGHT = 5.0
IMAGE_WIDTH, IMAGE_HEIGHT = 1920, 1080
HFOV_DEG = 60.0

Preset = Literal["wildtrack-like", "multiviewx-like"]


def substream(seed: int, name: str, *indices: int) -> np.random.Generator:
    """Independent generator for a named stream; stable across platforms and runs."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    key = [int(seed), zlib.crc32(name.encode()), *(int(i) for i in indices)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


# -- camera rigs ---------------------------------------------------------------

@dataclass(frozen=True)
class CameraRig:
    cameras: tuple[CameraModel, ...]
    area_x: float
    area_y: float
    fps: float = 2.0
    name: str = "custom"

    def __post_init__(self):
        if not self.cameras:
            raise ValueError("a rig needs at least one camera")
        object.__setattr__(self, "cameras", tuple(self.cameras))

    def project_ground(self, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Project ``(n, 2)`` ground points into every camera.

        Returns ``uv`` of shape ``(n_cam, n, 2)``, depth ``(n_cam, n)`` and
        the in-view mask ``(n_cam, n)``.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        hom = np.column_stack([pts, np.ones(len(pts))])
        Hs = np.stack([c.ground_homography for c in self.cameras])
        proj = np.einsum("cij,nj->cni", Hs, hom)
        depth = proj[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            uv = proj[..., :2] / depth[..., None]
        w = np.array([c.width for c in self.cameras])[:, None]
        h = np.array([c.height for c in self.cameras])[:, None]
        in_view = (
            (depth > EPS)
            & (uv[..., 0] >= 0) & (uv[..., 0] < w)
            & (uv[..., 1] >= 0) & (uv[..., 1] < h)
        )
        return uv, depth, in_view

    def coverage(self, grid: GroundGrid) -> np.ndarray:
        """Number of cameras seeing each cell center, shape ``grid.shape``."""
        r = grid.origin_x + (np.arange(grid.rows) + 0.5) * grid.cell_size
        c = grid.origin_y + (np.arange(grid.cols) + 0.5) * grid.cell_size
        xx, yy = np.meshgrid(r, c, indexing="ij")
        _, _, in_view = self.project_ground(np.column_stack([xx.ravel(), yy.ravel()]))
        return in_view.sum(axis=0).reshape(grid.shape)

    def subset(self, indices) -> "CameraRig":
        return CameraRig(tuple(self.cameras[i] for i in indices), self.area_x, self.area_y, self.fps, self.name)


def make_intrinsics(width: int = IMAGE_WIDTH, height: int = IMAGE_HEIGHT, hfov_deg: float = HFOV_DEG) -> CameraIntrinsics:
    f = (width / 2) / math.tan(math.radians(hfov_deg) / 2)
    return CameraIntrinsics(f, f, width / 2, height / 2, width, height)


def ring_rig(area_x, area_y, perimeter_points, height=CAMERA_HEIGHT, fps=2.0, name="custom") -> CameraRig:
    """Cameras at the given ground positions, raised to ``height`` and aimed at the area centroid."""
    K = make_intrinsics()
    target = (area_x / 2, area_y / 2, 0.0)
    cams = []
    for k, (x, y) in enumerate(perimeter_points):
        extr = CameraExtrinsics.look_at((x, y, height), target)
        cams.append(compose_projection(K, extr, camera_id=k))
    return CameraRig(tuple(cams), float(area_x), float(area_y), fps, name)


_PRESETS = {
    # corners first, then side midpoints; chosen for >= 2-fold coverage everywhere
    "wildtrack-like": (12.0, 36.0, [(0, 0), (12, 36), (12, 0), (0, 36), (6, 0), (6, 36), (0, 18)]),
    "multiviewx-like": (16.0, 25.0, [(0, 0), (16, 25), (16, 0), (0, 25), (8, 0), (8, 25)]),
}


def default_rig(preset: Preset = "wildtrack-like") -> CameraRig:
    """Preset rig: cameras on the area perimeter at 5 m, 1920x1080, 60 degree horizontal FOV."""
    if preset not in _PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(_PRESETS)}")
    ax, ay, points = _PRESETS[preset]
    return ring_rig(ax, ay, points, fps=2.0, name=preset)


def single_camera_rig(area_x: float = 6.0, area_y: float = 6.0, fps: float = 2.0) -> CameraRig:
    """One camera behind the short edge of a small area, seeing all of it."""
    K = make_intrinsics()
    extr = CameraExtrinsics.look_at((-4.0, area_y / 2, CAMERA_HEIGHT), (area_x / 2, area_y / 2, 0.0))
    return CameraRig((compose_projection(K, extr),), float(area_x), float(area_y), fps, "single")


# -- scenarios -----------------------------------------------------------------

@dataclass(frozen=True)
class MotionParams:
    speed_min: float = 0.5
    speed_max: float = 1.8

    def __post_init__(self):
        require(self.speed_min >= 0, "speed_min", f"must be non-negative, got {self.speed_min}")
        require(self.speed_max >= self.speed_min, "speed_max", "must be at least speed_min")

    @property
    def max_speed(self) -> float:
        return self.speed_max


@dataclass(frozen=True)
class Trajectory:
    positions: np.ndarray

    def __post_init__(self):
        p = np.array(self.positions, dtype=float).reshape(-1, 2)
        p.flags.writeable = False
        object.__setattr__(self, "positions", p)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class Scenario:
    rig: CameraRig
    grid: GroundGrid
    duration: int
    pedestrians: tuple[tuple[int, Trajectory], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "pedestrians", tuple(self.pedestrians))
        for pid, traj in self.pedestrians:
            if len(traj) != self.duration:
                raise ValueError(f"pedestrian {pid} has {len(traj)} positions, expected {self.duration}")

    def ground_truth(self, frame: int) -> list[tuple[int, float, float]]:
        return [(pid, float(t.positions[frame, 0]), float(t.positions[frame, 1])) for pid, t in self.pedestrians]

    def gt_frames(self):
        return [(f, self.ground_truth(f)) for f in range(self.duration)]

    def gt_tracks(self) -> dict[int, list[tuple[int, float, float]]]:
        return dict(self.gt_frames())


def generate_scenario(
    rig: CameraRig,
    n_pedestrians: int,
    duration: int,
    motion: MotionParams | None = None,
    rng: np.random.Generator | None = None,
    cell_size: float = 0.1,
) -> Scenario:
    """Waypoint walkers: head for a uniform random waypoint at a uniform random speed, re-draw both on arrival."""
    if n_pedestrians < 0:
        raise ValueError("n_pedestrians must be non-negative")
    if duration < 1:
        raise ValueError("duration must be at least 1")
    motion = motion or MotionParams()
    rng = rng if rng is not None else substream(0, "scenario")
    area = np.array([rig.area_x, rig.area_y])

    def draw_leg():
        return rng.uniform(0.0, 1.0, 2) * area, rng.uniform(motion.speed_min, motion.speed_max)

    peds = []
    for k in range(n_pedestrians):
        pos = rng.uniform(0.0, 1.0, 2) * area
        goal, speed = draw_leg()
        out = np.empty((duration, 2))
        out[0] = pos
        for f in range(1, duration):
            step = speed / rig.fps
            delta = goal - pos
            dist = float(np.hypot(*delta))
            if dist <= step:
                pos = goal
                goal, speed = draw_leg()
            else:
                pos = pos + delta * (step / dist)
            pos = np.clip(pos, 0.0, area)
            out[f] = pos
        peds.append((k + 1, Trajectory(out)))
    grid = GroundGrid.covering(rig.area_x, rig.area_y, cell_size)
    return Scenario(rig, grid, duration, tuple(peds))


def crossing_scenario(
    rig: CameraRig | None = None,
    step: float = 0.5,
    approach_frames: int = 8,
    pause_frames: int = 4,
    cell_size: float = 0.1,
) -> Scenario:
    """Two pedestrians walk head-on, meet at the area center, stand together, then finish swapping places.

    While they stand on the same spot their positions are indistinguishable,
    so only appearance can tell which one leaves in which direction.
    """
    rig = rig or default_rig("wildtrack-like")
    cx, cy = rig.area_x / 2, rig.area_y / 2
    span = step * approach_frames
    along = np.concatenate(
        [
            np.arange(approach_frames) * step - span,
            np.zeros(pause_frames + 1),
            np.arange(1, approach_frames + 1) * step,
        ]
    )
    a = np.column_stack([np.full_like(along, cx), cy + along])
    b = np.column_stack([np.full_like(along, cx), cy - along])
    grid = GroundGrid.covering(rig.area_x, rig.area_y, cell_size)
    return Scenario(rig, grid, len(along), ((1, Trajectory(a)), (2, Trajectory(b))))


def identity_embedding(identity: int, dim: int = EMBEDDING_DIM, seed: int = 0) -> np.ndarray:
    """Ground-truth appearance of one identity: a normalized standard normal draw."""
    if dim < 2:
        raise ValueError("embedding dimension must be at least 2")
    v = substream(seed, "identity", identity).standard_normal(dim)
    return v / np.linalg.norm(v)


def random_unit_vector(rng: np.random.Generator, dim: int = EMBEDDING_DIM) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class NoiseModel:
    p_miss_cam: float = 0.0
    occlusion_gain: float = 0.0
    fp_rate: float = 0.0
    sigma_loc: float = 0.0
    sigma_emb: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("p_miss_cam", "occlusion_gain"):
            v = getattr(self, name)
            require(0.0 <= v <= 1.0, name, f"must lie in [0, 1], got {v}")
        for name in ("fp_rate", "sigma_loc", "sigma_emb"):
            v = getattr(self, name)
            require(v >= 0.0 and math.isfinite(v), name, f"must be finite and non-negative, got {v}")
        require(self.seed >= 0, "seed", f"must be non-negative, got {self.seed}")


def occluder_counts(uv: np.ndarray, depth: np.ndarray, in_front: np.ndarray, radius: float = OCCLUSION_RADIUS_PX) -> np.ndarray:
    """Per camera and pedestrian, the number of other pedestrians within ``radius`` px that are closer."""
    n_cam, n = depth.shape
    counts = np.zeros((n_cam, n), dtype=np.int64)
    if n < 2:
        return counts
    for c in range(n_cam):
        d = np.hypot(*(uv[c][:, None, :] - uv[c][None, :, :]).transpose(2, 0, 1))
        closer = depth[c][None, :] < depth[c][:, None]
        near = (d <= radius) & closer & in_front[c][None, :] & in_front[c][:, None]
        np.fill_diagonal(near, False)
        counts[c] = near.sum(axis=1)
    return counts


def observe_frame(scenario: Scenario, frame: int, noise: NoiseModel, dim: int = EMBEDDING_DIM) -> list[DetectionRecord]:
    """Detections for one frame, drawn from substreams keyed by ``(noise.seed, frame)``."""
    if not 0 <= frame < scenario.duration:
        raise IndexError(f"frame {frame} outside [0, {scenario.duration})")
    rig = scenario.rig
    seed = noise.seed
    gt = scenario.ground_truth(frame)
    dets: list[DetectionRecord] = []

    if gt:
        pts = np.array([(x, y) for _, x, y in gt])
        uv, depth, in_view = rig.project_ground(pts)
        occ = occluder_counts(uv, depth, depth > EPS)
        p_miss = np.minimum(1.0, noise.p_miss_cam + noise.occlusion_gain * occ)
        # one stream per camera so adding cameras never changes earlier cameras' draws
        draws = np.stack([substream(seed, "miss", frame, c).random(len(gt)) for c in range(len(rig.cameras))])
        seen = (in_view & (draws >= p_miss)).any(axis=0)

        rng = substream(seed, "measure", frame)
        loc = rng.normal(0.0, 1.0, (len(gt), 2)) * noise.sigma_loc
        scores = 1.0 - rng.uniform(0.0, 0.2, len(gt))
        emb_noise = rng.standard_normal((len(gt), dim)) * noise.sigma_emb
        for k, (pid, x, y) in enumerate(gt):
            if not seen[k]:
                continue
            emb = identity_embedding(pid, dim, seed)
            if noise.sigma_emb > 0:
                emb = emb + emb_noise[k]
                emb = emb / np.linalg.norm(emb)
            dets.append(DetectionRecord(frame, x + loc[k, 0], y + loc[k, 1], float(scores[k]), emb))

    rng = substream(seed, "false_positive", frame)
    for _ in range(int(rng.poisson(noise.fp_rate)) if noise.fp_rate > 0 else 0):
        x = float(rng.uniform(0.0, rig.area_x))
        y = float(rng.uniform(0.0, rig.area_y))
        score = float(rng.uniform(0.4, 0.7))
        dets.append(DetectionRecord(frame, x, y, score, random_unit_vector(rng, dim)))
    return dets


def observe_all(scenario: Scenario, noise: NoiseModel, dim: int = EMBEDDING_DIM) -> dict[int, list[DetectionRecord]]:
    return {f: observe_frame(scenario, f, noise, dim) for f in range(scenario.duration)}
