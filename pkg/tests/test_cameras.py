import json

import numpy as np
import pytest

from lccalib.cameras import (
    EquirectCamera,
    PinholeCamera,
    camera_from_dict,
    load_camera,
    save_camera,
)
from lccalib.errors import NonConvergenceError, SchemaError


@pytest.fixture
def plain_cam():
    return PinholeCamera(fx=500, fy=500, cx=320, cy=240, width=640, height=480)


@pytest.fixture
def k1_cam():
    return PinholeCamera(fx=500, fy=500, cx=320, cy=240, width=640, height=480, k1=0.1)


def angular_error(a, b):
    # 2 asin(|a_hat - b_hat| / 2) stays accurate for tiny angles, where the
    # dot-product/arccos form saturates around sqrt(eps)
    a = a / np.linalg.norm(a, axis=-1, keepdims=True)
    b = b / np.linalg.norm(b, axis=-1, keepdims=True)
    half = 0.5 * np.linalg.norm(a - b, axis=-1)
    return 2.0 * np.arcsin(np.clip(half, 0.0, 1.0))


class TestPinhole:
    def test_optical_axis(self, plain_cam):
        px, ok = plain_cam.project(np.array([0.0, 0.0, 1.0]))
        assert ok and np.allclose(px, [320.0, 240.0])

    def test_offset_point(self, plain_cam):
        px, _ = plain_cam.project(np.array([1.0, 0.0, 1.0]))
        assert np.allclose(px, [820.0, 240.0])

    def test_radial_distortion_value(self, k1_cam):
        # r^2 = 0.25, radial factor 1.025, u = 500 * 0.5125 + 320
        px, _ = k1_cam.project(np.array([0.5, 0.0, 1.0]))
        assert np.allclose(px, [576.25, 240.0])

    def test_unproject_principal_point(self, plain_cam):
        b = plain_cam.unproject(np.array([320.0, 240.0]))
        assert np.allclose(b, [0.0, 0.0, 1.0])

    def test_unproject_inverts_projection(self, plain_cam):
        b = plain_cam.unproject(np.array([820.0, 240.0]))
        expected = np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)
        assert np.allclose(b, expected, atol=1e-9)

    def test_unproject_distorted(self, k1_cam):
        b = k1_cam.unproject(np.array([576.25, 240.0]))
        expected = np.array([0.5, 0.0, 1.0])
        expected /= np.linalg.norm(expected)
        assert angular_error(b, expected) < 1e-9

    def test_behind_camera_flagged(self, plain_cam):
        px, ok = plain_cam.project(np.array([0.0, 0.0, -1.0]))
        assert not ok and np.all(np.isnan(px))
        pxs, oks = plain_cam.project(np.array([[0, 0, 1.0], [0, 0, 1e-9]]))
        assert oks.tolist() == [True, False]

    @pytest.mark.parametrize("k1", [0.45, -0.45])
    def test_round_trip_random_moderate_distortion(self, k1):
        # type invariant: < 1e-6 rad over 10,000 in-image points, |k1| <= 0.5
        rng = np.random.default_rng(42)
        cam = PinholeCamera(
            fx=720.0,
            fy=710.0,
            cx=512.0,
            cy=383.0,
            width=1024,
            height=768,
            k1=k1,
            k2=-0.04 if k1 > 0 else 0.04,
            k3=0.002,
            p1=0.004,
            p2=-0.003,
        )
        n = 10_000
        z = rng.uniform(0.1, 20.0, n)
        x = rng.uniform(-0.9, 0.9, n) * z * (cam.width / 2) / cam.fx
        y = rng.uniform(-0.9, 0.9, n) * z * (cam.height / 2) / cam.fy
        pts = np.stack([x, y, z], axis=1)
        px, ok = cam.project(pts)
        inside = ok & cam.contains(px)
        bearings = cam.unproject(px[inside])
        err = angular_error(bearings, pts[inside])
        assert inside.sum() > 8000
        assert err.max() < 1e-6

    def test_distortion_inversion_nonconvergence(self):
        # beyond the fold of a strong barrel model a pixel has no preimage
        cam = PinholeCamera(fx=500, fy=500, cx=320, cy=240, width=640, height=480, k1=-3.0)
        with pytest.raises(NonConvergenceError, match=r"pixel"):
            cam.unproject(np.array([[639.0, 479.0]]))

    def test_validation(self):
        with pytest.raises(ValueError):
            PinholeCamera(fx=-1, fy=500, cx=0, cy=0, width=640, height=480)
        with pytest.raises(ValueError):
            PinholeCamera(fx=500, fy=500, cx=0, cy=0, width=0, height=480)


class TestEquirect:
    def test_forward_center(self):
        cam = EquirectCamera(width=1920, height=960)
        px, ok = cam.project(np.array([0.0, 0.0, 1.0]))
        assert ok and np.allclose(px, [960.0, 480.0])

    def test_right_maps_to_three_quarters(self):
        cam = EquirectCamera(width=1920, height=960)
        px, _ = cam.project(np.array([1.0, 0.0, 0.0]))
        assert np.allclose(px, [1440.0, 480.0])

    def test_up_maps_to_top(self):
        cam = EquirectCamera(width=1920, height=960)
        px, _ = cam.project(np.array([0.0, -1.0, 0.0]))
        assert np.allclose(px, [960.0, 0.0])

    def test_unproject_center(self):
        cam = EquirectCamera(width=1920, height=960)
        assert np.allclose(cam.unproject(np.array([960.0, 480.0])), [0, 0, 1], atol=1e-12)

    def test_unproject_inverse(self):
        cam = EquirectCamera(width=1920, height=960)
        assert np.allclose(cam.unproject(np.array([1440.0, 480.0])), [1, 0, 0], atol=1e-12)

    def test_seam(self):
        cam = EquirectCamera(width=1920, height=960)
        b = cam.unproject(np.array([0.0, 480.0]))
        assert np.allclose(b, [0, 0, -1], atol=1e-12)
        # projecting the backward bearing lands on the wrapped seam pixel
        px, _ = cam.project(np.array([0.0, 0.0, -1.0]))
        assert 0.0 <= px[0] < cam.width
        assert np.allclose(px, [0.0, 480.0], atol=1e-9)

    def test_every_bearing_lands_inside(self):
        cam = EquirectCamera(width=1920, height=960)
        rng = np.random.default_rng(3)
        d = rng.normal(size=(20_000, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        d = np.concatenate([d, [[0, 1, 0], [0, -1, 0], [0, 0, -1]]])
        px, _ = cam.project(d)
        assert np.all(px[:, 0] >= 0) and np.all(px[:, 0] < cam.width)
        assert np.all(px[:, 1] >= 0) and np.all(px[:, 1] < cam.height)

    def test_round_trip_off_poles(self):
        # type invariant: < 1e-9 rad excluding 1e-3 rad polar caps
        cam = EquirectCamera(width=1920, height=960)
        rng = np.random.default_rng(4)
        d = rng.normal(size=(10_000, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        polar = np.abs(np.arcsin(np.clip(-d[:, 1], -1, 1))) > np.pi / 2 - 1e-3
        d = d[~polar]
        px, _ = cam.project(d)
        err = angular_error(cam.unproject(px), d)
        assert err.max() < 1e-9

    def test_zero_norm_rejected(self):
        cam = EquirectCamera(width=1920, height=960)
        with pytest.raises(ValueError):
            cam.project(np.zeros(3))

    def test_aspect_enforced(self):
        with pytest.raises(ValueError):
            EquirectCamera(width=1000, height=960)


class TestIntrinsicsFile:
    def test_round_trip_pinhole(self, tmp_path, k1_cam):
        path = tmp_path / "cam.json"
        save_camera(k1_cam, path)
        data = json.loads(path.read_text())
        assert data["model"] == "pinhole"
        assert data["intrinsics"] == [500, 500, 320, 240]
        assert data["distortion"] == [0.1, 0.0, 0.0, 0.0, 0.0]  # k1 k2 p1 p2 k3
        loaded = load_camera(path)
        assert isinstance(loaded, PinholeCamera)
        assert loaded.k1 == 0.1 and loaded.fx == 500

    def test_round_trip_equirect(self, tmp_path):
        cam = EquirectCamera(width=1920, height=960)
        path = tmp_path / "cam.json"
        save_camera(cam, path)
        data = json.loads(path.read_text())
        assert data["distortion"] == [] and data["intrinsics"] == []
        assert isinstance(load_camera(path), EquirectCamera)

    def test_schema_errors(self):
        with pytest.raises(SchemaError):
            camera_from_dict({"model": "fisheye", "width": 10, "height": 10})
        with pytest.raises(SchemaError):
            camera_from_dict({"model": "pinhole", "width": 10, "height": 10, "intrinsics": [1, 2]})
        with pytest.raises(SchemaError):
            camera_from_dict({"width": 10, "height": 10})

    def test_tolerates_plumb_bob_order(self):
        cam = camera_from_dict(
            {
                "model": "pinhole",
                "width": 640,
                "height": 480,
                "intrinsics": [500, 501, 320, 240],
                "distortion": [0.1, 0.01, 0.002, 0.003, 0.0001],
            }
        )
        assert (cam.k1, cam.k2, cam.p1, cam.p2, cam.k3) == (0.1, 0.01, 0.002, 0.003, 0.0001)
