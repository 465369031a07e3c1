import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bevtrack.geometry import (
    BehindCameraError,
    CalibrationError,
    CameraExtrinsics,
    CameraIntrinsics,
    DegenerateHomographyError,
    GroundGrid,
    HorizonError,
    OutOfBoundsError,
    camera_from_dict,
    camera_to_dict,
    compose_projection,
    grid_to_world,
    ground_homography,
    load_calibration,
    nearest_rotation,
    perturb_translation,
    project_image_to_ground,
    project_world_to_image,
    save_calibration,
    world_to_grid,
)
from bevtrack.sim import default_rig


def naive_matmul(A, B):
    """Triple-loop product, kept independent of numpy's matmul."""
    n, k, m = len(A), len(B), len(B[0])
    return [[sum(A[i][p] * B[p][j] for p in range(k)) for j in range(m)] for i in range(n)]


def identity_camera(K=None, t=(0.0, 0.0, 0.0)):
    K = np.eye(3) if K is None else np.asarray(K, dtype=float)
    intr = CameraIntrinsics(K[0, 0], K[1, 1], K[0, 2], K[1, 2], 100, 100)
    return compose_projection(intr, CameraExtrinsics(np.eye(3), t))


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


class TestComposeProjection:
    def test_identity(self):
        cam = identity_camera()
        np.testing.assert_array_equal(cam.projection, np.hstack([np.eye(3), np.zeros((3, 1))]))

    def test_scaled_with_translation(self):
        cam = identity_camera(K=np.diag([2.0, 2.0, 1.0]), t=(0, 0, 1))
        np.testing.assert_array_equal(cam.projection, [[2, 0, 0, 0], [0, 2, 0, 0], [0, 0, 1, 1]])

    def test_realistic_rig_matches_naive_product(self):
        for cam in default_rig("wildtrack-like").cameras:
            Rt = np.hstack([cam.extrinsics.rotation, cam.extrinsics.translation[:, None]])
            expected = naive_matmul(cam.intrinsics.matrix.tolist(), Rt.tolist())
            np.testing.assert_allclose(cam.projection, expected, atol=1e-9, rtol=0)

    def test_rejects_non_orthonormal_rotation(self):
        with pytest.raises(CalibrationError):
            CameraExtrinsics(np.diag([1.0, 1.0, 1.1]), (0, 0, 0))
        with pytest.raises(CalibrationError):
            CameraExtrinsics(np.diag([1.0, 1.0, -1.0]), (0, 0, 0))

    def test_invalid_intrinsics(self):
        with pytest.raises(CalibrationError):
            CameraIntrinsics(-1.0, 1.0, 0, 0, 10, 10)
        with pytest.raises(CalibrationError):
            CameraIntrinsics(1.0, 1.0, 11, 0, 10, 10)


class TestGroundHomography:
    def test_column_deletion(self):
        P = np.arange(1, 13, dtype=float).reshape(3, 4)
        np.testing.assert_array_equal(ground_homography(P), [[1, 2, 4], [5, 6, 8], [9, 10, 12]])

    def test_degenerate_camera(self):
        H = ground_homography(np.hstack([np.eye(3), np.zeros((3, 1))]))
        np.testing.assert_array_equal(H, [[1, 0, 0], [0, 1, 0], [0, 0, 0]])
        with pytest.raises(DegenerateHomographyError):
            project_image_to_ground(H, (1, 1))

    def test_commutes_with_projection_on_ground(self):
        rng = np.random.default_rng(3)
        for cam in default_rig("multiviewx-like").cameras:
            pts = rng.uniform(-20, 20, (100, 2))
            full = cam.projection @ np.column_stack([pts, np.zeros(100), np.ones(100)]).T
            homog = cam.ground_homography @ np.column_stack([pts, np.ones(100)]).T
            np.testing.assert_allclose(homog, full, rtol=0, atol=1e-9 * np.abs(full).max())


class TestProjection:
    def test_direct_substitution(self):
        cam = identity_camera()
        assert project_world_to_image(cam, (0, 0, 2)) == (0.0, 0.0, 2.0)
        u, v, _ = project_world_to_image(cam, (2, 4, 2))
        assert (u, v) == (1.0, 2.0)

    def test_behind_camera(self):
        with pytest.raises(BehindCameraError):
            project_world_to_image(identity_camera(), (0, 0, -1))

    def test_inverse_identity_homographies(self):
        assert project_image_to_ground(np.eye(3), (3, 4)) == (3.0, 4.0)
        assert project_image_to_ground(np.diag([2.0, 2.0, 1.0]), (6, 8)) == (3.0, 4.0)

    def test_horizon(self):
        # inverse maps (u, v, 1) to (u, 1, v): the inverse depth is v
        H = np.array([[1.0, 0, 0], [0, 0, 1.0], [0, 1.0, 0.0]])
        with pytest.raises(HorizonError):
            project_image_to_ground(H, (5.0, 0.0))
        with pytest.raises(HorizonError):
            project_image_to_ground(H, (5.0, -3.0))

    def test_round_trip_realistic(self):
        rng = np.random.default_rng(11)
        for cam in default_rig("wildtrack-like").cameras:
            done = 0
            while done < 100:
                x, y = rng.uniform(-5, 40, 2)
                try:
                    u, v, _ = project_world_to_image(cam, (x, y, 0.0))
                except BehindCameraError:
                    continue
                gx, gy = project_image_to_ground(cam, (u, v))
                assert math.hypot(gx - x, gy - y) < 1e-6
                done += 1

    def test_round_trip_random_cameras(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            pos = np.append(rng.uniform(-10, 10, 2), rng.uniform(2, 10))
            extr = CameraExtrinsics.look_at(pos, np.append(rng.uniform(-5, 5, 2), 0.0))
            intr = CameraIntrinsics(*rng.uniform(500, 2000, 2), 960, 540, 1920, 1080)
            cam = compose_projection(intr, extr)
            for x, y in rng.uniform(-5, 5, (20, 2)):
                try:
                    u, v, _ = project_world_to_image(cam, (x, y, 0.0))
                except BehindCameraError:
                    continue
                assert np.allclose(project_image_to_ground(cam, (u, v)), (x, y), atol=1e-6, rtol=0)

    def test_look_at_rotation_is_proper(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            extr = CameraExtrinsics.look_at(rng.uniform(-5, 5, 3) + (0, 0, 6), rng.uniform(-5, 5, 3))
            R = extr.rotation
            assert np.max(np.abs(R @ R.T - np.eye(3))) < 1e-9
            assert abs(np.linalg.det(R) - 1) < 1e-9


class TestGrid:
    grid = GroundGrid(0.0, 0.0, 0.1, 120, 360)

    def test_quantize(self):
        row, col, ox, oy = world_to_grid(self.grid, (1.23, 0.07))
        assert (row, col) == (12, 0)
        assert ox == pytest.approx(0.3, abs=1e-9)
        assert oy == pytest.approx(0.7, abs=1e-9)

    def test_origin(self):
        assert world_to_grid(self.grid, (0.0, 0.0)) == (0, 0, 0.0, 0.0)
        assert grid_to_world(self.grid, 0, 0, 0.0, 0.0) == (0.0, 0.0)

    def test_out_of_bounds(self):
        with pytest.raises(OutOfBoundsError):
            world_to_grid(self.grid, (-0.01, 0.0))
        with pytest.raises(OutOfBoundsError):
            world_to_grid(self.grid, (12.0, 0.0))
        with pytest.raises(OutOfBoundsError):
            grid_to_world(self.grid, 120, 0)

    def test_dequantize(self):
        x, y = grid_to_world(self.grid, 12, 0, 0.3, 0.7)
        assert x == pytest.approx(1.23, abs=1e-12)
        assert y == pytest.approx(0.07, abs=1e-12)

    def test_round_trip_1000(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            row, col = int(rng.integers(0, 120)), int(rng.integers(0, 360))
            ox, oy = rng.uniform(0, 1, 2)
            x, y = grid_to_world(self.grid, row, col, ox, oy)
            r2, c2, ox2, oy2 = world_to_grid(self.grid, (x, y))
            assert abs((r2 + ox2) - (row + ox)) < 1e-12 * 360
            assert abs((c2 + oy2) - (col + oy)) < 1e-12 * 360
            assert np.allclose(grid_to_world(self.grid, r2, c2, ox2, oy2), (x, y), atol=1e-12, rtol=0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 11.999), st.floats(0, 35.999))
    def test_offsets_in_unit_interval(self, x, y):
        row, col, ox, oy = world_to_grid(self.grid, (x, y))
        assert 0 <= ox < 1 and 0 <= oy < 1
        assert self.grid.contains(row, col)

    def test_covering(self):
        g = GroundGrid.covering(12, 36, 0.1)
        assert g.shape == (120, 360)
        assert GroundGrid.covering(16, 25, 0.025).shape == (640, 1000)


class TestPerturbation:
    base = CameraExtrinsics(np.eye(3), (1.0, 2.0, 3.0))

    def test_zero_noise(self):
        out = perturb_translation(self.base, 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(out.translation, self.base.translation)

    def test_deterministic(self):
        a = perturb_translation(self.base, 0.1, np.random.default_rng(9))
        b = perturb_translation(self.base, 0.1, np.random.default_rng(9))
        np.testing.assert_array_equal(a.translation, b.translation)
        np.testing.assert_array_equal(a.rotation, self.base.rotation)

    def test_sample_std(self):
        rng = np.random.default_rng(42)
        draws = np.array([perturb_translation(self.base, 0.1, rng).translation for _ in range(10000)])
        std = (draws - self.base.translation).std(axis=0, ddof=1)
        assert np.all((0.097 <= std) & (std <= 0.103))

    def test_negative_sigma(self):
        with pytest.raises(ValueError):
            perturb_translation(self.base, -0.1, np.random.default_rng(0))


class TestCalibrationFile:
    def test_round_trip(self, tmp_path):
        cams = default_rig("multiviewx-like").cameras
        save_calibration(tmp_path / "calib.json", cams)
        loaded = load_calibration(tmp_path / "calib.json")
        assert [c.camera_id for c in loaded] == [c.camera_id for c in cams]
        for a, b in zip(cams, loaded):
            np.testing.assert_allclose(a.projection, b.projection, atol=1e-9)

    def test_rounded_rotation_is_reorthonormalized(self):
        cam = default_rig().cameras[1]
        entry = camera_to_dict(cam)
        entry["R"] = [round(v, 6) for v in entry["R"]]
        with pytest.raises(CalibrationError):
            camera_from_dict(entry, reorthonormalize=False)
        fixed = camera_from_dict(entry)
        R = fixed.extrinsics.rotation
        assert np.max(np.abs(R @ R.T - np.eye(3))) < 1e-12

    def test_unknown_field(self):
        entry = camera_to_dict(default_rig().cameras[0])
        entry["distortion"] = [0, 0, 0, 0]
        with pytest.raises(CalibrationError):
            camera_from_dict(entry)

    def test_nearest_rotation_fixes_reflection(self):
        rng = np.random.default_rng(1)
        R = random_rotation(rng)
        assert np.allclose(nearest_rotation(R + 1e-7), R, atol=1e-6)
