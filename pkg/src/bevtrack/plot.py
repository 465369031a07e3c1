"""SVG track plots and 16-bit PGM / SVG heatmap dumps.

Image layout follows the grid: pixel ``(i, j)`` (row-major, top-left origin)
is grid cell ``(row=i, col=j)``, so image rows run along world x and image
columns along world y.
"""

from __future__ import annotations

import colorsys
import hashlib
import math
from pathlib import Path

import numpy as np

from .bev import OccupancyMap, render_heatmap
from .geometry import GroundGrid

PX_PER_M = 20.0
MARGIN = 40.0
PGM_MAX = 65535

# viridis anchors, dark to bright
_RAMP = np.array(
    [
        (68, 1, 84), (72, 40, 120), (62, 74, 137), (49, 104, 142), (38, 130, 142),
        (31, 158, 137), (53, 183, 121), (109, 205, 89), (180, 222, 44), (253, 231, 37),
    ],
    dtype=float,
)


class FrameRangeError(ValueError):
    """Requested frame is not present in the input."""


def id_color(track_id: int) -> str:
    h = hashlib.sha256(str(int(track_id)).encode()).digest()
    r, g, b = colorsys.hls_to_rgb(int.from_bytes(h[:2], "big") / 65536, 0.45, 0.75)
    return f"#{round(r * 255):02x}{round(g * 255):02x}{round(b * 255):02x}"


def ramp_color(v: float) -> str:
    t = min(max(v, 0.0), 1.0) * (len(_RAMP) - 1)
    k = min(int(t), len(_RAMP) - 2)
    c = _RAMP[k] + (t - k) * (_RAMP[k + 1] - _RAMP[k])
    return "#" + "".join(f"{int(round(ch)):02x}" for ch in c)


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _tick_step(extent: float) -> float:
    for step in (1, 2, 5, 10, 20, 50, 100):
        if extent / step <= 10:
            return float(step)
    return 10.0 ** math.ceil(math.log10(extent / 10))


def _svg_frame(grid: GroundGrid) -> tuple[list[str], float, float]:
    """SVG header plus meter-labelled axes. World y runs right, world x runs down."""
    ext_x = grid.rows * grid.cell_size
    ext_y = grid.cols * grid.cell_size
    w = ext_y * PX_PER_M + 2 * MARGIN
    h = ext_x * PX_PER_M + 2 * MARGIN
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(w)}" height="{_fmt(h)}" viewBox="0 0 {_fmt(w)} {_fmt(h)}">',
        f'<rect x="0" y="0" width="{_fmt(w)}" height="{_fmt(h)}" fill="white"/>',
        f'<g class="axes" stroke="black" stroke-width="1" fill="none">'
        f'<rect x="{_fmt(MARGIN)}" y="{_fmt(MARGIN)}" width="{_fmt(ext_y * PX_PER_M)}" height="{_fmt(ext_x * PX_PER_M)}"/></g>',
    ]
    labels = ['<g class="ticks" font-family="sans-serif" font-size="10" fill="black">']
    step = _tick_step(ext_y)
    for k in range(int(ext_y // step) + 1):
        v = k * step
        px = MARGIN + v * PX_PER_M
        labels.append(f'<text x="{_fmt(px)}" y="{_fmt(MARGIN - 6)}" text-anchor="middle">{_fmt(grid.origin_y + v)}</text>')
    step = _tick_step(ext_x)
    for k in range(int(ext_x // step) + 1):
        v = k * step
        py = MARGIN + v * PX_PER_M
        labels.append(f'<text x="{_fmt(MARGIN - 6)}" y="{_fmt(py + 3)}" text-anchor="end">{_fmt(grid.origin_x + v)}</text>')
    labels.append(f'<text x="{_fmt(w / 2)}" y="{_fmt(14)}" text-anchor="middle">y (m)</text>')
    labels.append(f'<text x="{_fmt(12)}" y="{_fmt(h / 2)}" text-anchor="middle" transform="rotate(-90 12 {_fmt(h / 2)})">x (m)</text>')
    labels.append("</g>")
    return out + labels, w, h


def _to_px(grid: GroundGrid, x: float, y: float) -> tuple[float, float]:
    return MARGIN + (y - grid.origin_y) * PX_PER_M, MARGIN + (x - grid.origin_x) * PX_PER_M


def _polylines(grid, tracks: dict[int, list[tuple[float, float]]], cls: str, color=None) -> list[str]:
    out = []
    for tid in sorted(tracks):
        pts = " ".join(f"{_fmt(u)},{_fmt(v)}" for u, v in (_to_px(grid, x, y) for x, y in tracks[tid]))
        stroke = color or id_color(tid)
        out.append(f'<polyline class="{cls}" data-id="{tid}" points="{pts}" fill="none" stroke="{stroke}" stroke-width="2"/>')
    return out


def _group(by_frame: dict) -> dict[int, list[tuple[float, float]]]:
    paths: dict[int, list] = {}
    for frame in sorted(by_frame):
        for tid, x, y in by_frame[frame]:
            paths.setdefault(tid, []).append((x, y))
    return paths


def tracks_svg(grid: GroundGrid, tracks: dict, gt: dict | None = None) -> str:
    """``tracks`` and ``gt`` map frame to ``[(id, x, y), ...]``; GT is drawn underneath in gray."""
    lines, _, _ = _svg_frame(grid)
    if gt:
        lines += _polylines(grid, _group(gt), "gt", "#b0b0b0")
    lines += _polylines(grid, _group(tracks), "track")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def plot_tracks(grid: GroundGrid, tracks: dict, out_path, gt: dict | None = None) -> Path:
    out = Path(out_path)
    out.write_text(tracks_svg(grid, tracks, gt))
    return out


def quantize(occupancy: OccupancyMap) -> np.ndarray:
    return np.rint(occupancy.scores * PGM_MAX).astype(np.uint16)


def heatmap_pgm(occupancy: OccupancyMap) -> bytes:
    """Binary 16-bit PGM, big-endian, one pixel per cell in row-major order."""
    rows, cols = occupancy.grid.shape
    return f"P5\n{cols} {rows}\n{PGM_MAX}\n".encode() + quantize(occupancy).astype(">u2").tobytes()


def read_pgm(data: bytes) -> np.ndarray:
    magic, dims, maxval, body = data.split(b"\n", 3)
    if magic != b"P5" or int(maxval) != PGM_MAX:
        raise ValueError("expected a 16-bit binary PGM")
    cols, rows = (int(v) for v in dims.split())
    return np.frombuffer(body, dtype=">u2").reshape(rows, cols).astype(np.uint16)


def heatmap_svg(occupancy: OccupancyMap) -> str:
    """Nonzero cells as colored squares over the lowest ramp color."""
    grid = occupancy.grid
    lines, _, _ = _svg_frame(grid)
    size = grid.cell_size * PX_PER_M
    lines.append(
        f'<rect class="background" x="{_fmt(MARGIN)}" y="{_fmt(MARGIN)}" width="{_fmt(grid.cols * size)}" '
        f'height="{_fmt(grid.rows * size)}" fill="{ramp_color(0.0)}"/>'
    )
    q = quantize(occupancy)
    for r, c in zip(*np.nonzero(q)):
        v = q[r, c] / PGM_MAX
        lines.append(
            f'<rect class="cell" x="{_fmt(MARGIN + c * size)}" y="{_fmt(MARGIN + r * size)}" '
            f'width="{_fmt(size)}" height="{_fmt(size)}" fill="{ramp_color(v)}"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def plot_heatmap(by_frame: dict, frame: int, grid: GroundGrid, out_path, sigma_cells: float = 1.0) -> OccupancyMap:
    """Render one frame of ``{frame: [(x, y), ...]}``; writes PGM or SVG depending on the suffix."""
    if frame not in by_frame:
        lo, hi = (min(by_frame), max(by_frame)) if by_frame else (None, None)
        raise FrameRangeError(f"frame {frame} not in input (frames {lo}..{hi})")
    occupancy = render_heatmap(by_frame[frame], grid, sigma_cells)
    out = Path(out_path)
    if out.suffix.lower() == ".svg":
        out.write_text(heatmap_svg(occupancy))
    else:
        out.write_bytes(heatmap_pgm(occupancy))
    return occupancy
