"""Command-line entry point: simulate, track, evaluate, project, plot, run.

Exit codes: 0 success, 1 runtime error, 2 configuration or validation error.
The only environment variable read is BEVTRACK_OUT, which supplies the
output directory for ``simulate`` and ``run`` when ``--out`` is omitted.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .assoc import run_tracker
from .config import ConfigError
from .fileio import ParseError, read_detections, read_gt, read_tracks, tracks_by_frame, write_tracks
from .geometry import CalibrationError, GroundGrid, load_calibration, project_image_to_ground
from .pipeline import evaluate_files, load_pipeline_config, load_tracker_config, run_pipeline, simulate
from .plot import FrameRangeError, plot_heatmap, plot_tracks

OUT_ENV = "BEVTRACK_OUT"
EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("bevtrack")


class UsageError(ValueError):
    pass


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None
    return a, b


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV)
    if not out:
        raise UsageError(f"--out not given and {OUT_ENV} not set")
    return Path(out)


def cmd_simulate(args) -> int:
    config = load_pipeline_config(args.config)
    out = _out_dir(args)
    scenario = simulate(config, out)
    log.info("wrote %d frames, %d pedestrians to %s", scenario.duration, len(scenario.pedestrians), out)
    return EXIT_OK


def cmd_track(args) -> int:
    config = load_tracker_config(args.config) if args.config else None
    rows = run_tracker(read_detections(args.detections), config)
    write_tracks(args.out, rows)
    log.info("wrote %d track rows to %s", len(rows), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    report = evaluate_files(args.gt, args.tracks, args.detections, args.det_r, args.track_r)
    if args.out:
        Path(args.out).write_text(report.to_json())
    print(report.tsv_header())
    print(report.to_tsv())
    return EXIT_OK


def cmd_project(args) -> int:
    cameras = load_calibration(args.calib)
    chosen = [c for c in cameras if c.camera_id == args.camera] if args.camera is not None else cameras[:1]
    if not chosen:
        raise UsageError(f"camera {args.camera} not in {args.calib}")
    x, y = project_image_to_ground(chosen[0], args.uv)
    print(f"{x:.6f} {y:.6f}")
    return EXIT_OK


def _grid(args) -> GroundGrid:
    ax, ay = args.area
    if ax <= 0 or ay <= 0 or args.cell <= 0:
        raise UsageError("--area and --cell must be positive")
    return GroundGrid.covering(ax, ay, args.cell)


def cmd_plot_tracks(args) -> int:
    tracks = tracks_by_frame(read_tracks(args.tracks))
    gt = read_gt(args.gt) if args.gt else None
    plot_tracks(_grid(args), tracks, args.out, gt)
    return EXIT_OK


def cmd_plot_heatmap(args) -> int:
    if bool(args.detections) == bool(args.gt):
        raise UsageError("give exactly one of --detections or --gt")
    if args.detections:
        points = {f: [(d.x, d.y) for d in ds] for f, ds in read_detections(args.detections).items()}
    else:
        points = {f: [(x, y) for _, x, y in objs] for f, objs in read_gt(args.gt).items()}
    plot_heatmap(points, args.frame, _grid(args), args.out, args.sigma)
    return EXIT_OK


def cmd_run(args) -> int:
    config = load_pipeline_config(args.config)
    out = args.out or os.environ.get(OUT_ENV) or config.out_dir
    if not out:
        raise UsageError(f"no output directory: pass --out, set {OUT_ENV}, or set out_dir in the config")
    report, manifest = run_pipeline(config, out)
    log.info("run finished in %.2f s", manifest.duration_s)
    print(report.tsv_header())
    print(report.to_tsv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bevtrack", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write gt.jsonl, detections.jsonl and calibration.json")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help=f"output directory (default: ${OUT_ENV})")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser(
        "track",
        help="run the tracker on a detections file",
        description="Detections are used only when score > det_threshold (strict; 0.4 by default excludes 0.4).",
    )
    s.add_argument("--detections", required=True)
    s.add_argument("--config", help="tracker config JSON, bare or a full run config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_track)

    s = sub.add_parser("evaluate", help="score tracks against ground truth")
    s.add_argument("--gt", required=True)
    s.add_argument("--tracks", required=True)
    s.add_argument("--detections", help="also report MODA/MODP/precision/recall for these detections")
    s.add_argument("--det-r", type=float, default=0.5, help="detection match radius in meters")
    s.add_argument("--track-r", type=float, default=1.0, help="tracking match radius in meters")
    s.add_argument("--out", help="metrics.json path")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("project", help="back-project a pixel to the ground plane")
    s.add_argument("--calib", required=True)
    s.add_argument("--uv", required=True, type=_pair, help="pixel as u,v")
    s.add_argument("--camera", type=int, help="camera id (default: first in file)")
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("plot", help="render tracks or an occupancy heatmap")
    kinds = s.add_subparsers(dest="kind", required=True)
    for name, func in (("tracks", cmd_plot_tracks), ("heatmap", cmd_plot_heatmap)):
        k = kinds.add_parser(name)
        k.add_argument("--area", type=_pair, default=(12.0, 36.0), help="ground extent x,y in meters")
        k.add_argument("--cell", type=float, default=0.1, help="cell size in meters")
        k.add_argument("--out", required=True)
        k.set_defaults(func=func)
        if name == "tracks":
            k.add_argument("--tracks", required=True)
            k.add_argument("--gt", help="underlay ground truth in gray")
        else:
            k.add_argument("--detections")
            k.add_argument("--gt")
            k.add_argument("--frame", type=int, required=True)
            k.add_argument("--sigma", type=float, default=1.0, help="Gaussian sigma in cells")
            k.description = "Writes a 16-bit PGM (pixel (i, j) = cell (row i, col j)) or, for a .svg path, a color SVG."

    s = sub.add_parser("run", help="simulate, track and evaluate in one go")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, then out_dir in the config)")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParseError, UsageError, FrameRangeError, CalibrationError) as exc:
        print(f"bevtrack: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"bevtrack: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
