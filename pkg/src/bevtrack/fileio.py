"""Record types and the on-disk formats exchanged between subcommands.

* ground truth, JSON Lines: ``{"frame": int, "gt": [{"id": int, "x": m, "y": m}]}``
* detections, JSON Lines: ``{"frame": int, "detections": [{"x", "y", "score", "emb": [...]}]}``
* tracks, CSV: ``frame,track_id,x,y,score`` with 6-decimal coordinates

Floats in JSON use Python's shortest round-trip repr, so files are stable
across platforms and reload to bit-identical values.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EMBEDDING_DIM = 64
TRACK_HEADER = ["frame", "track_id", "x", "y", "score"]


class ParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


@dataclass(frozen=True)
class DetectionRecord:
    frame: int
    x: float
    y: float
    score: float
    embedding: np.ndarray

    @property
    def position(self) -> tuple[float, float]:
        return self.x, self.y


@dataclass(frozen=True)
class TrackRow:
    frame: int
    track_id: int
    x: float
    y: float
    score: float


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "), allow_nan=False)


def _iter_jsonl(path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON ({exc.msg})") from None


def write_gt(path, frames) -> None:
    """``frames``: iterable of ``(frame, [(id, x, y), ...])``."""
    with open(path, "w") as fh:
        for frame, objs in frames:
            gt = [{"id": int(i), "x": float(x), "y": float(y)} for i, x, y in objs]
            fh.write(_dumps({"frame": int(frame), "gt": gt}) + "\n")


def read_gt(path) -> dict[int, list[tuple[int, float, float]]]:
    out: dict[int, list] = {}
    for lineno, obj in _iter_jsonl(path):
        try:
            frame = int(obj["frame"])
            out[frame] = [(int(g["id"]), float(g["x"]), float(g["y"])) for g in obj["gt"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(path, lineno, f"malformed ground-truth record ({exc!r})") from None
    return out


def write_detections(path, frames) -> None:
    """``frames``: iterable of ``(frame, [DetectionRecord, ...])``."""
    with open(path, "w") as fh:
        for frame, dets in frames:
            rows = [
                {"x": float(d.x), "y": float(d.y), "score": float(d.score), "emb": [float(v) for v in d.embedding]}
                for d in dets
            ]
            fh.write(_dumps({"frame": int(frame), "detections": rows}) + "\n")


def read_detections(path) -> dict[int, list[DetectionRecord]]:
    out: dict[int, list] = {}
    for lineno, obj in _iter_jsonl(path):
        try:
            frame = int(obj["frame"])
            out[frame] = [
                DetectionRecord(frame, float(d["x"]), float(d["y"]), float(d["score"]), np.asarray(d["emb"], dtype=float))
                for d in obj["detections"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(path, lineno, f"malformed detection record ({exc!r})") from None
    return out


def format_tracks(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACK_HEADER)
    for r in rows:
        writer.writerow([int(r.frame), int(r.track_id), f"{r.x:.6f}", f"{r.y:.6f}", f"{r.score:.6f}"])
    return buf.getvalue()


def write_tracks(path, rows) -> None:
    Path(path).write_text(format_tracks(rows))


def read_tracks(path) -> list[TrackRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return rows
        if [h.strip() for h in header] != TRACK_HEADER:
            raise ParseError(path, 1, f"expected header {','.join(TRACK_HEADER)}")
        for lineno, rec in enumerate(reader, 2):
            if not rec:
                continue
            try:
                frame, tid, x, y, score = rec
                rows.append(TrackRow(int(frame), int(tid), float(x), float(y), float(score)))
            except ValueError as exc:
                raise ParseError(path, lineno, f"malformed track row ({exc})") from None
    return rows


def tracks_by_frame(rows) -> dict[int, list[tuple[int, float, float]]]:
    out: dict[int, list] = {}
    for r in rows:
        out.setdefault(r.frame, []).append((r.track_id, r.x, r.y))
    return out


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
