"""Pinhole camera model, ground-plane homography and BEV grid quantization.

World frame: z up, ground plane at z = 0. Grid axis convention: world x maps
to grid rows, world y to grid columns, cell (0, 0) has its corner at
(origin_x, origin_y).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EPS = 1e-9
ROTATION_TOL = 1e-9
MAX_CONDITION = 1e12


class CalibrationError(ValueError):
    """Camera parameters violate the pinhole model's invariants."""


class BehindCameraError(ValueError):
    """World point lies at or behind the camera plane."""


class DegenerateHomographyError(ValueError):
    """Ground homography is singular or too ill-conditioned to invert."""


class HorizonError(ValueError):
    """Pixel ray does not meet the ground plane in front of the camera."""


class OutOfBoundsError(IndexError):
    """Position falls outside the ground grid."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    image_width: int
    image_height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise CalibrationError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx <= self.image_width and 0 <= self.cy <= self.image_height):
            raise CalibrationError(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"{self.image_width}x{self.image_height} image"
            )

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @classmethod
    def from_matrix(cls, K, width: int, height: int) -> "CameraIntrinsics":
        K = np.asarray(K, dtype=float).reshape(3, 3)
        if abs(K[0, 1]) > EPS or np.any(np.abs(K[2] - (0.0, 0.0, 1.0)) > EPS) or abs(K[1, 0]) > EPS:
            raise CalibrationError("K must be upper-triangular with zero skew and last row (0, 0, 1)")
        return cls(float(K[0, 0]), float(K[1, 1]), float(K[0, 2]), float(K[1, 2]), int(width), int(height))


def nearest_rotation(R) -> np.ndarray:
    """Closest proper rotation to ``R`` in the Frobenius sense (polar decomposition via SVD)."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def check_rotation(R: np.ndarray, tol: float = ROTATION_TOL) -> None:
    if R.shape != (3, 3):
        raise CalibrationError(f"rotation must be 3x3, got shape {R.shape}")
    err = np.max(np.abs(R @ R.T - np.eye(3)))
    if err > tol:
        raise CalibrationError(f"rotation is not orthonormal (max |RR^T - I| = {err:.3g})")
    det = np.linalg.det(R)
    if abs(det - 1.0) > tol:
        raise CalibrationError(f"rotation determinant is {det:.12g}, expected +1")


@dataclass(frozen=True)
class CameraExtrinsics:
    """World-to-camera pose: ``X_cam = rotation @ X_world + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        check_rotation(R)
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    @classmethod
    def look_at(cls, position, target, up=(0.0, 0.0, 1.0)) -> "CameraExtrinsics":
        """Camera at ``position`` whose optical axis points at ``target``.

        Image x runs right and image y runs down, so the camera frame is
        (right, down, forward).
        """
        position = np.asarray(position, dtype=float)
        forward = np.asarray(target, dtype=float) - position
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(up, dtype=float))
        norm = np.linalg.norm(right)
        if norm < EPS:
            raise CalibrationError("optical axis is parallel to the up vector")
        right /= norm
        down = np.cross(forward, right)
        R = nearest_rotation(np.vstack([right, down, forward]))
        return cls(R, -R @ position)


@dataclass(frozen=True)
class CameraModel:
    intrinsics: CameraIntrinsics
    extrinsics: CameraExtrinsics
    projection: np.ndarray = field(repr=False)
    ground_homography: np.ndarray = field(repr=False)
    camera_id: int = 0

    @property
    def width(self) -> int:
        return self.intrinsics.image_width

    @property
    def height(self) -> int:
        return self.intrinsics.image_height


def compose_projection(
    intrinsics: CameraIntrinsics, extrinsics: CameraExtrinsics, camera_id: int = 0
) -> CameraModel:
    """Build ``P = K [R | t]`` and its z = 0 homography."""
    check_rotation(extrinsics.rotation)
    Rt = np.hstack([extrinsics.rotation, extrinsics.translation[:, None]])
    P = intrinsics.matrix @ Rt
    P.flags.writeable = False
    H = ground_homography(P)
    H.flags.writeable = False
    return CameraModel(intrinsics, extrinsics, P, H, camera_id)


def ground_homography(P) -> np.ndarray:
    """Drop the z column of a 3x4 projection. The result may be singular."""
    P = np.asarray(P, dtype=float)
    if P.shape != (3, 4):
        raise ValueError(f"projection must be 3x4, got shape {P.shape}")
    return P[:, [0, 1, 3]].copy()


def project_world_to_image(model: CameraModel, world_point) -> tuple[float, float, float]:
    """Return ``(u, v, s)`` where ``s`` is the projective depth."""
    X = np.asarray(world_point, dtype=float)
    if X.shape != (3,) or not np.all(np.isfinite(X)):
        raise ValueError(f"world point must be a finite 3-vector, got {world_point!r}")
    p = model.projection @ np.append(X, 1.0)
    s = p[2]
    if s <= EPS:
        raise BehindCameraError(f"point {tuple(X)} has depth {s:.3g}")
    return float(p[0] / s), float(p[1] / s), float(s)


def invert_3x3(M) -> np.ndarray:
    """Inverse of a 3x3 matrix via adjugate / determinant, with a condition check."""
    M = np.asarray(M, dtype=float)
    a, b, c = M[0]
    d, e, f = M[1]
    g, h, i = M[2]
    adj = np.array(
        [
            [e * i - f * h, c * h - b * i, b * f - c * e],
            [f * g - d * i, a * i - c * g, c * d - a * f],
            [d * h - e * g, b * g - a * h, a * e - b * d],
        ]
    )
    det = a * adj[0, 0] + b * adj[1, 0] + c * adj[2, 0]
    if det == 0.0 or not math.isfinite(det):
        raise DegenerateHomographyError("homography is singular")
    inv = adj / det
    cond = np.linalg.norm(M, 1) * np.linalg.norm(inv, 1)
    if not math.isfinite(cond) or cond >= MAX_CONDITION:
        raise DegenerateHomographyError(f"homography condition number {cond:.3g} exceeds {MAX_CONDITION:g}")
    return inv


def project_image_to_ground(model_or_homography, pixel) -> tuple[float, float]:
    """Intersect the ray through ``pixel`` with the ground plane z = 0.

    Accepts either a :class:`CameraModel` or a bare 3x3 ground homography.
    """
    H = getattr(model_or_homography, "ground_homography", model_or_homography)
    u, v = (float(p) for p in pixel)
    w = invert_3x3(H) @ np.array([u, v, 1.0])
    # w[2] is the inverse depth; non-positive means the ray rises above the horizon
    if w[2] <= EPS:
        raise HorizonError(f"pixel ({u}, {v}) does not reach the ground in front of the camera")
    return float(w[0] / w[2]), float(w[1] / w[2])


def perturb_translation(extrinsics: CameraExtrinsics, sigma: float, rng: np.random.Generator) -> CameraExtrinsics:
    """Add iid N(0, sigma^2) noise to each translation component."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return extrinsics
    noise = rng.normal(0.0, sigma, size=3)
    return CameraExtrinsics(extrinsics.rotation, extrinsics.translation + noise)


@dataclass(frozen=True)
class GroundGrid:
    origin_x: float
    origin_y: float
    cell_size: float
    rows: int
    cols: int

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError(f"grid dimensions must be positive, got {self.rows}x{self.cols}")

    @classmethod
    def covering(cls, area_x: float, area_y: float, cell_size: float = 0.1) -> "GroundGrid":
        """Grid anchored at the world origin that covers ``[0, area_x] x [0, area_y]``."""
        rows = int(math.ceil(round(area_x / cell_size, 9)))
        cols = int(math.ceil(round(area_y / cell_size, 9)))
        return cls(0.0, 0.0, cell_size, rows, cols)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def contains(self, row: int, col: int) -> bool:
        return 0 <= row < self.rows and 0 <= col < self.cols

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return grid_to_world(self, row, col, 0.5, 0.5)


def world_to_grid(grid: GroundGrid, point) -> tuple[int, int, float, float]:
    """Quantize a ground position into ``(row, col, offset_x, offset_y)``."""
    x, y = (float(p) for p in point)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"point must be finite, got ({x}, {y})")
    fx = (x - grid.origin_x) / grid.cell_size
    fy = (y - grid.origin_y) / grid.cell_size
    row, col = math.floor(fx), math.floor(fy)
    ox, oy = fx - row, fy - col
    # tiny negatives round the remainder up to exactly 1.0
    if ox >= 1.0:
        row, ox = row + 1, 0.0
    if oy >= 1.0:
        col, oy = col + 1, 0.0
    if not grid.contains(row, col):
        raise OutOfBoundsError(f"({x}, {y}) maps to cell ({row}, {col}) outside {grid.rows}x{grid.cols}")
    return row, col, ox, oy


def grid_to_world(grid: GroundGrid, row: int, col: int, offset_x: float = 0.0, offset_y: float = 0.0) -> tuple[float, float]:
    if not grid.contains(row, col):
        raise OutOfBoundsError(f"cell ({row}, {col}) outside {grid.rows}x{grid.cols}")
    if not (0.0 <= offset_x < 1.0 and 0.0 <= offset_y < 1.0):
        raise ValueError(f"offsets must lie in [0, 1), got ({offset_x}, {offset_y})")
    return (
        grid.origin_x + (row + offset_x) * grid.cell_size,
        grid.origin_y + (col + offset_y) * grid.cell_size,
    )


# -- calibration files -------------------------------------------------------

def camera_to_dict(model: CameraModel) -> dict:
    return {
        "id": model.camera_id,
        "K": [float(v) for v in model.intrinsics.matrix.ravel()],
        "R": [float(v) for v in model.extrinsics.rotation.ravel()],
        "t": [float(v) for v in model.extrinsics.translation],
        "width": model.width,
        "height": model.height,
    }


def camera_from_dict(entry: dict, reorthonormalize: bool = True) -> CameraModel:
    expected = {"id", "K", "R", "t", "width", "height"}
    missing = expected - entry.keys()
    extra = entry.keys() - expected
    if missing or extra:
        raise CalibrationError(f"calibration entry: missing {sorted(missing)}, unknown {sorted(extra)}")
    if len(entry["K"]) != 9 or len(entry["R"]) != 9 or len(entry["t"]) != 3:
        raise CalibrationError("calibration entry needs K[9], R[9], t[3]")
    R = np.asarray(entry["R"], dtype=float).reshape(3, 3)
    if reorthonormalize:
        R = nearest_rotation(R)
    intr = CameraIntrinsics.from_matrix(entry["K"], entry["width"], entry["height"])
    extr = CameraExtrinsics(R, entry["t"])
    return compose_projection(intr, extr, camera_id=int(entry["id"]))


def load_calibration(path, reorthonormalize: bool = True) -> list[CameraModel]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("cameras", [data])
    return [camera_from_dict(e, reorthonormalize) for e in data]


def save_calibration(path, cameras) -> None:
    Path(path).write_text(json.dumps([camera_to_dict(c) for c in cameras], indent=2) + "\n")
