import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from bevtrack.bev import render_heatmap
from bevtrack.cli import main
from bevtrack.fileio import TrackRow, sha256_file, write_gt, write_tracks
from bevtrack.geometry import GroundGrid, load_calibration, project_world_to_image
from bevtrack.plot import read_pgm

SVG = "{http://www.w3.org/2000/svg}"
SMALL = {
    "seed": 5,
    "scenario": {"n_pedestrians": 4, "duration": 25},
    "noise": {"p_miss_cam": 0.2, "fp_rate": 0.5, "sigma_loc": 0.05, "sigma_emb": 0.1},
}


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


class TestValidation:
    @pytest.mark.parametrize(
        "data",
        [
            {"seed": 1, "noise": {"fp_rate": -0.5}},
            {"seed": 1, "tracker": {"tau1": 0}},
            {"seed": 1, "scenario": {"preset": "pets"}},
            {"seed": 1, "colour": "red"},
            {"noise": {}},
        ],
    )
    def test_exit_code_2(self, tmp_path, data, capsys):
        assert main(["run", "--config", write_config(tmp_path, data), "--out", str(tmp_path / "o")]) == 2
        assert "error" in capsys.readouterr().err

    def test_field_named_in_message(self, tmp_path, capsys):
        main(["run", "--config", write_config(tmp_path, {"seed": 1, "noise": {"fp_rate": -0.5}}), "--out", str(tmp_path)])
        assert "noise.fp_rate" in capsys.readouterr().err

    def test_runtime_error_exit_1(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["run", "--config", write_config(tmp_path, SMALL), "--out", str(blocker / "sub")]) == 1

    def test_malformed_input_reports_line(self, tmp_path, capsys):
        bad = tmp_path / "gt.jsonl"
        bad.write_text('{"frame": 0, "gt": []}\n{"frame": 1}\n')
        tracks = tmp_path / "t.csv"
        write_tracks(tracks, [])
        assert main(["evaluate", "--gt", str(bad), "--tracks", str(tracks)]) == 2
        assert ":2:" in capsys.readouterr().err


class TestRun:
    def test_deterministic_and_manifest(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        for name in ("a", "b"):
            assert main(["run", "--config", cfg, "--out", str(tmp_path / name)]) == 0
        for f in ("gt.jsonl", "detections.jsonl", "tracks.csv", "metrics.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        for name, digest in manifest["files"].items():
            assert sha256_file(tmp_path / "a" / name) == digest
        assert manifest["config"]["seed"] == 5

    def test_stages_match_run(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "run")]) == 0
        stage = tmp_path / "stage"
        assert main(["simulate", "--config", cfg, "--out", str(stage)]) == 0
        assert main(["track", "--detections", str(stage / "detections.jsonl"), "--config", cfg, "--out", str(stage / "tracks.csv")]) == 0
        assert main([
            "evaluate", "--gt", str(stage / "gt.jsonl"), "--tracks", str(stage / "tracks.csv"),
            "--detections", str(stage / "detections.jsonl"), "--out", str(stage / "metrics.json"),
        ]) == 0
        for f in ("gt.jsonl", "detections.jsonl", "tracks.csv", "metrics.json"):
            assert (stage / f).read_bytes() == (tmp_path / "run" / f).read_bytes()

    def test_out_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BEVTRACK_OUT", str(tmp_path / "env"))
        assert main(["simulate", "--config", write_config(tmp_path, SMALL)]) == 0
        assert (tmp_path / "env" / "gt.jsonl").exists()

    def test_noise_seed_defaults_to_run_seed(self, tmp_path):
        explicit = dict(SMALL, noise=dict(SMALL["noise"], seed=5))
        main(["simulate", "--config", write_config(tmp_path, SMALL), "--out", str(tmp_path / "a")])
        main(["simulate", "--config", write_config(tmp_path, explicit, "e.json"), "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "detections.jsonl").read_bytes() == (tmp_path / "b" / "detections.jsonl").read_bytes()

    def test_evaluate_prints_tsv(self, tmp_path, capsys):
        main(["run", "--config", write_config(tmp_path, SMALL), "--out", str(tmp_path)])
        capsys.readouterr()
        main(["evaluate", "--gt", str(tmp_path / "gt.jsonl"), "--tracks", str(tmp_path / "tracks.csv")])
        header, row = capsys.readouterr().out.splitlines()
        assert header.split("\t")[0] == "MODA" and len(row.split("\t")) == 10


class TestProject:
    def test_prints_ground_point(self, tmp_path, capsys):
        main(["simulate", "--config", write_config(tmp_path, SMALL), "--out", str(tmp_path)])
        cam = load_calibration(tmp_path / "calibration.json")[3]
        u, v, _ = project_world_to_image(cam, (4.0, 20.0, 0.0))
        capsys.readouterr()
        assert main(["project", "--calib", str(tmp_path / "calibration.json"), "--uv", f"{u!r},{v!r}", "--camera", "3"]) == 0
        x, y = map(float, capsys.readouterr().out.split())
        assert abs(x - 4.0) < 1e-5 and abs(y - 20.0) < 1e-5

    def test_bad_uv(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["project", "--calib", "x.json", "--uv", "12"])
        assert exc.value.code == 2


class TestPlot:
    def tracks(self, tmp_path, rows):
        path = tmp_path / "tracks.csv"
        write_tracks(path, rows)
        return str(path)

    def test_empty_tracks(self, tmp_path):
        out = tmp_path / "t.svg"
        assert main(["plot", "tracks", "--tracks", self.tracks(tmp_path, []), "--out", str(out)]) == 0
        root = ET.parse(out).getroot()
        assert root.findall(f".//{SVG}polyline") == []
        assert any(t.text == "y (m)" for t in root.iter(f"{SVG}text"))

    def test_one_track_two_points(self, tmp_path):
        rows = [TrackRow(0, 3, 1.0, 2.0, 0.9), TrackRow(1, 3, 1.5, 2.5, 0.9)]
        out = tmp_path / "t.svg"
        main(["plot", "tracks", "--tracks", self.tracks(tmp_path, rows), "--out", str(out)])
        lines = ET.parse(out).getroot().findall(f".//{SVG}polyline")
        assert len(lines) == 1
        assert len(lines[0].get("points").split()) == 2
        first = out.read_bytes()
        main(["plot", "tracks", "--tracks", self.tracks(tmp_path, rows), "--out", str(out)])
        assert out.read_bytes() == first

    def test_gt_underlay(self, tmp_path):
        gt = tmp_path / "gt.jsonl"
        write_gt(gt, [(0, [(1, 1.0, 1.0)]), (1, [(1, 2.0, 1.0)])])
        out = tmp_path / "t.svg"
        main(["plot", "tracks", "--tracks", self.tracks(tmp_path, []), "--gt", str(gt), "--out", str(out)])
        (line,) = ET.parse(out).getroot().findall(f".//{SVG}polyline")
        assert line.get("class") == "gt" and line.get("stroke") == "#b0b0b0"

    def heat(self, tmp_path, frames, frame, suffix=".pgm"):
        gt = tmp_path / "gt.jsonl"
        write_gt(gt, frames)
        out = tmp_path / f"h{suffix}"
        code = main(["plot", "heatmap", "--gt", str(gt), "--frame", str(frame), "--area", "3,4", "--out", str(out)])
        return code, out

    def test_empty_frame(self, tmp_path):
        code, out = self.heat(tmp_path, [(0, [])], 0)
        assert code == 0
        img = read_pgm(out.read_bytes())
        assert img.shape == (30, 40) and not img.any()

    def test_single_point_peak(self, tmp_path):
        code, out = self.heat(tmp_path, [(0, []), (1, [(1, 1.25, 2.05)])], 1)
        img = read_pgm(out.read_bytes())
        assert np.unravel_index(img.argmax(), img.shape) == (12, 20)
        assert img.max() == 65535

    def test_pixels_are_quantized_scores(self, tmp_path):
        pts = [(0.33, 1.7), (2.2, 3.1), (2.4, 3.3)]
        code, out = self.heat(tmp_path, [(0, [(k, x, y) for k, (x, y) in enumerate(pts)])], 0)
        expected = render_heatmap(pts, GroundGrid.covering(3.0, 4.0, 0.1), 1.0).scores
        np.testing.assert_array_equal(read_pgm(out.read_bytes()), np.rint(expected * 65535).astype(np.uint16))

    def test_svg_heatmap(self, tmp_path):
        code, out = self.heat(tmp_path, [(0, [(1, 1.25, 2.05)])], 0, ".svg")
        cells = ET.parse(out).getroot().findall(f".//{SVG}rect[@class='cell']")
        assert code == 0 and cells

    def test_frame_out_of_range(self, tmp_path):
        code, _ = self.heat(tmp_path, [(0, [])], 3)
        assert code == 2
