"""Occupancy maps on the ground grid: Gaussian rendering, 3x3 NMS and peak extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GroundGrid, grid_to_world

DEFAULT_THRESHOLD = 0.4

# neighbours that precede (0, 0) in row-major order; equal-valued ones win ties
_EARLIER_NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, -1))


@dataclass(frozen=True)
class OccupancyMap:
    grid: GroundGrid
    scores: np.ndarray

    def __post_init__(self):
        scores = np.array(self.scores, dtype=float)
        if scores.shape != self.grid.shape:
            raise ValueError(f"scores shape {scores.shape} does not match grid {self.grid.shape}")
        if scores.size and (np.nanmin(scores) < 0.0 or np.nanmax(scores) > 1.0 or np.isnan(scores).any()):
            raise ValueError("occupancy scores must lie in [0, 1]")
        scores.flags.writeable = False
        object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class Peak:
    row: int
    col: int
    score: float
    offset_x: float
    offset_y: float
    world_x: float
    world_y: float


def render_heatmap(points, grid: GroundGrid, sigma_cells: float = 1.0) -> OccupancyMap:
    """Per-cell max over points of ``exp(-d^2 / (2 sigma^2))``, d in cell units from the cell center."""
    if not sigma_cells > 0:
        raise ValueError(f"sigma_cells must be positive, got {sigma_cells}")
    rows = np.arange(grid.rows) + 0.5
    cols = np.arange(grid.cols) + 0.5
    scores = np.zeros(grid.shape)
    for x, y in points:
        px = (x - grid.origin_x) / grid.cell_size
        py = (y - grid.origin_y) / grid.cell_size
        d2 = (rows - px)[:, None] ** 2 + (cols - py)[None, :] ** 2
        np.maximum(scores, np.exp(-d2 / (2 * sigma_cells**2)), out=scores)
    return OccupancyMap(grid, scores)


def nms_maxpool(occupancy: OccupancyMap) -> OccupancyMap:
    """Keep cells equal to their truncated 3x3 neighbourhood max; zero the rest.

    Among equal-valued neighbouring maxima only the row-major first survives.
    """
    s = occupancy.scores
    padded = np.pad(s, 1, constant_values=-np.inf)
    r, c = s.shape
    windows = [padded[1 + dr : 1 + dr + r, 1 + dc : 1 + dc + c] for dr in (-1, 0, 1) for dc in (-1, 0, 1)]
    keep = s >= np.max(windows, axis=0)
    for dr, dc in _EARLIER_NEIGHBOURS:
        keep &= padded[1 + dr : 1 + dr + r, 1 + dc : 1 + dc + c] != s
    return OccupancyMap(occupancy.grid, np.where(keep, s, 0.0))


def extract_peaks(occupancy: OccupancyMap, offsets=None, threshold: float = DEFAULT_THRESHOLD) -> list[Peak]:
    """Local maxima scoring strictly above ``threshold``, best first.

    ``offsets`` is an optional ``(rows, cols, 2)`` array of sub-cell offsets in
    [0, 1); without it peaks sit at cell centers.
    """
    suppressed = nms_maxpool(occupancy)
    grid = occupancy.grid
    if offsets is not None:
        offsets = np.asarray(offsets, dtype=float)
        if offsets.shape != (*grid.shape, 2):
            raise ValueError(f"offsets must have shape {(*grid.shape, 2)}, got {offsets.shape}")
    peaks = []
    for row, col in zip(*np.nonzero(suppressed.scores > threshold)):
        row, col = int(row), int(col)
        ox, oy = (0.5, 0.5) if offsets is None else (float(offsets[row, col, 0]), float(offsets[row, col, 1]))
        wx, wy = grid_to_world(grid, row, col, ox, oy)
        peaks.append(Peak(row, col, float(suppressed.scores[row, col]), ox, oy, wx, wy))
    peaks.sort(key=lambda p: (-p.score, p.row, p.col))
    return peaks
