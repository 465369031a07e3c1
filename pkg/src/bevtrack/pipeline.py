"""Run configuration and the simulate -> track -> evaluate pipeline."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

from . import __version__
from .assoc import TrackerConfig, run_tracker
from .config import ConfigError, config_hash, from_dict, require, to_dict
from .fileio import (
    read_detections,
    read_gt,
    read_tracks,
    sha256_file,
    tracks_by_frame,
    write_detections,
    write_gt,
    write_tracks,
)
from .geometry import save_calibration
from .metrics import MetricsReport, evaluate
from .sim import (
    MotionParams,
    NoiseModel,
    Scenario,
    crossing_scenario,
    default_rig,
    generate_scenario,
    observe_all,
    single_camera_rig,
    substream,
)

OUTPUT_FILES = ("gt.jsonl", "detections.jsonl", "tracks.csv", "metrics.json")


@dataclass(frozen=True)
class ScenarioConfig:
    preset: Literal["wildtrack-like", "multiviewx-like", "single-camera"] = "wildtrack-like"
    layout: Literal["waypoints", "crossing"] = "waypoints"
    n_pedestrians: int = 20
    duration: int = 400
    cell_size: float = 0.1
    motion: MotionParams = field(default_factory=MotionParams)

    def __post_init__(self):
        require(self.n_pedestrians >= 0, "n_pedestrians", f"must be non-negative, got {self.n_pedestrians}")
        require(self.duration >= 1, "duration", f"must be at least 1, got {self.duration}")
        require(self.cell_size > 0, "cell_size", f"must be positive, got {self.cell_size}")


@dataclass(frozen=True)
class NoiseConfig:
    """Same knobs as :class:`NoiseModel`; ``seed`` falls back to the run seed."""

    p_miss_cam: float = 0.0
    occlusion_gain: float = 0.0
    fp_rate: float = 0.0
    sigma_loc: float = 0.0
    sigma_emb: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        self.model(0)

    def model(self, default_seed: int) -> NoiseModel:
        seed = default_seed if self.seed is None else self.seed
        return NoiseModel(self.p_miss_cam, self.occlusion_gain, self.fp_rate, self.sigma_loc, self.sigma_emb, seed)


@dataclass(frozen=True)
class MetricsConfig:
    det_r: float = 0.5
    track_r: float = 1.0

    def __post_init__(self):
        require(self.det_r > 0, "det_r", f"must be positive, got {self.det_r}")
        require(self.track_r > 0, "track_r", f"must be positive, got {self.track_r}")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    out_dir: Optional[str] = None

    def __post_init__(self):
        require(self.seed >= 0, "seed", f"must be non-negative, got {self.seed}")

    @property
    def noise_model(self) -> NoiseModel:
        return self.noise.model(self.seed)


def pipeline_config_from_dict(data) -> PipelineConfig:
    if isinstance(data, dict) and "seed" not in data:
        raise ConfigError("seed", "required (no implicit entropy)")
    return from_dict(PipelineConfig, data)


def load_pipeline_config(path) -> PipelineConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: not valid JSON ({exc})") from None
    return pipeline_config_from_dict(data)


_RUN_KEYS = {"seed", "scenario", "noise", "tracker", "metrics", "out_dir"}


def load_tracker_config(path) -> TrackerConfig:
    """Tracker settings from a bare tracker object or from a full run config."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: not valid JSON ({exc})") from None
    if isinstance(data, dict) and data.keys() & _RUN_KEYS:
        return pipeline_config_from_dict(data).tracker
    return from_dict(TrackerConfig, data)


def build_scenario(config: PipelineConfig) -> Scenario:
    sc = config.scenario
    rig = single_camera_rig() if sc.preset == "single-camera" else default_rig(sc.preset)
    if sc.layout == "crossing":
        return crossing_scenario(rig, cell_size=sc.cell_size)
    return generate_scenario(rig, sc.n_pedestrians, sc.duration, sc.motion, substream(config.seed, "scenario"), sc.cell_size)


def simulate(config: PipelineConfig, out_dir) -> Scenario:
    """Write gt.jsonl, detections.jsonl and calibration.json for the configured scenario."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenario = build_scenario(config)
    dets = observe_all(scenario, config.noise_model)
    write_gt(out / "gt.jsonl", scenario.gt_frames())
    write_detections(out / "detections.jsonl", sorted(dets.items()))
    save_calibration(out / "calibration.json", scenario.rig.cameras)
    return scenario


def evaluate_files(gt_path, tracks_path, detections_path=None, det_r: float = 0.5, track_r: float = 1.0) -> MetricsReport:
    gt = read_gt(gt_path)
    pred = tracks_by_frame(read_tracks(tracks_path))
    det = None
    if detections_path is not None:
        det = {f: [(d.x, d.y) for d in ds] for f, ds in read_detections(detections_path).items()}
    return evaluate(gt, pred, det, det_r, track_r)


@dataclass
class RunManifest:
    tool_version: str
    config_hash: str
    config: dict
    files: dict
    duration_s: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "tool_version": self.tool_version,
                "config_hash": self.config_hash,
                "config": self.config,
                "files": self.files,
                "duration_s": self.duration_s,
            },
            indent=2,
            sort_keys=True,
        ) + "\n"


def run_pipeline(config: PipelineConfig, out_dir=None) -> tuple[MetricsReport, RunManifest]:
    """Simulate, track and evaluate; every stage reads the previous stage's files back from disk."""
    out_dir = out_dir if out_dir is not None else config.out_dir
    if out_dir is None:
        raise ConfigError("out_dir", "no output directory given")
    out = Path(out_dir)
    start = time.perf_counter()
    simulate(config, out)
    rows = run_tracker(read_detections(out / "detections.jsonl"), config.tracker)
    write_tracks(out / "tracks.csv", rows)
    report = evaluate_files(
        out / "gt.jsonl", out / "tracks.csv", out / "detections.jsonl", config.metrics.det_r, config.metrics.track_r
    )
    (out / "metrics.json").write_text(report.to_json())
    manifest = RunManifest(
        tool_version=__version__,
        config_hash=config_hash(config),
        config=to_dict(config),
        files={name: sha256_file(out / name) for name in (*OUTPUT_FILES, "calibration.json")},
        duration_s=round(time.perf_counter() - start, 3),
    )
    (out / "manifest.json").write_text(manifest.to_json())
    return report, manifest
