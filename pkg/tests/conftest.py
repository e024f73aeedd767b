"""Shared synthetic fixtures.

The expensive render-and-recover assets (cluttered room, 1e5-point cloud,
camera images under both projection models) are built once per session and
reused by the fine-registration, overlay, pipeline, and acceptance tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from lccalib.cameras import EquirectCamera, PinholeCamera, save_camera
from lccalib.config import load_config
from lccalib.correspondences import save_correspondences
from lccalib.geometry import RigidTransform, apply_perturbation
from lccalib.images import GrayImage, save_gray
from lccalib.pointcloud import PointCloud, save_cloud
from lccalib.preprocess import equalize_cloud, equalize_image
from lccalib import synthetic
from lccalib.virtual_camera import load_index_map


@dataclass(frozen=True)
class RecoveryBench:
    """Everything needed for a render-and-recover experiment."""

    scene: synthetic.Scene
    cloud_raw: PointCloud
    cloud: PointCloud  # equalized
    transform: RigidTransform  # ground-truth LiDAR -> camera
    pinhole: PinholeCamera
    pinhole_image: GrayImage  # equalized
    equirect: EquirectCamera
    equirect_image: GrayImage  # equalized

    def perturbed_start(self, seed: int, translation: float = 0.2, rotation_deg: float = 5.0):
        """Exactly `translation` meters and `rotation_deg` degrees off truth."""
        rng = np.random.default_rng(seed)
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        offset = rng.normal(size=3)
        offset *= translation / np.linalg.norm(offset)
        rotated = apply_perturbation(
            np.concatenate([np.zeros(3), np.radians(rotation_deg) * axis]), self.transform
        )
        return RigidTransform(rotated.quaternion, self.transform.translation + offset)


GROUND_TRUTH_TILT_DEG = (1.5, -2.0, 1.0)


def _ground_truth() -> RigidTransform:
    base = synthetic.camera_along_x((0.05, -0.06, 0.1))
    return apply_perturbation(
        np.concatenate([np.zeros(3), np.radians(GROUND_TRUTH_TILT_DEG)]), base
    )


@pytest.fixture(scope="session")
def bench() -> RecoveryBench:
    rng = np.random.default_rng(7)
    scene = synthetic.make_cluttered_room()
    cloud_raw = synthetic.sample_cloud(scene, 100_000, rng)
    transform = _ground_truth()
    pinhole = PinholeCamera(fx=430, fy=430, cx=512, cy=384, width=1024, height=768)
    equirect = EquirectCamera(width=1024, height=512)
    remap = synthetic.gamma_remap(0.75)
    pin_img = synthetic.render_scene_image(
        scene, pinhole, transform, remap=remap, noise=0.02,
        rng=np.random.default_rng(8), supersample=2,
    )
    eq_img = synthetic.render_scene_image(
        scene, equirect, transform, remap=remap, noise=0.02,
        rng=np.random.default_rng(9), supersample=2,
    )
    return RecoveryBench(
        scene=scene,
        cloud_raw=cloud_raw,
        cloud=equalize_cloud(cloud_raw),
        transform=transform,
        pinhole=pinhole,
        pinhole_image=equalize_image(pin_img),
        equirect=equirect,
        equirect_image=equalize_image(eq_img),
    )


@pytest.fixture(scope="session")
def pillar_scene() -> synthetic.Scene:
    return synthetic.make_room(
        half_sizes=(3.0, 3.0, 1.5), pillar={"center": (1.5, 0.0), "half": (0.35, 0.35)}
    )


@pytest.fixture(scope="session")
def flat_room() -> synthetic.Scene:
    return synthetic.make_room(half_sizes=(4.0, 4.0, 1.2))


SPIN_ELEVATIONS = tuple(np.linspace(-30.0, 30.0, 32))


def make_spin_sequence(scene, pairs_raw, azimuth_steps: int = 800):
    return synthetic.spinning_scans(
        scene, pairs_raw, azimuth_steps=azimuth_steps, elevations_deg=SPIN_ELEVATIONS
    )


# --- full-pipeline fixture directory -----------------------------------------


def build_pipeline_fixture(
    root: Path,
    bench: RecoveryBench,
    *,
    seed: int = 42,
    n_matches: int = 100,
    outlier_fraction: float = 0.4,
) -> Path:
    """Write a complete input set (PLYs, PNG, intrinsics, matches, config).

    The correspondence file mimics an external matcher: keypoints on the
    rendered LiDAR intensity image resolved against the camera image at the
    ground-truth transform, with a fraction of uniformly wrong matches.
    Returns the config path.
    """
    from lccalib.pipeline import stage_fov, stage_preprocess, stage_render

    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    # split the raw cloud into two "scans" stored with raw-looking intensities
    n = len(bench.cloud_raw)
    half = n // 2
    scale = rng.uniform(3.0, 200.0)
    for i, sl in enumerate((slice(0, half), slice(half, n))):
        scan = PointCloud(
            bench.cloud_raw.points[sl], bench.cloud_raw.intensities[sl] * scale
        )
        save_cloud(scan, root / f"scan{i}.ply")

    # camera image: re-render without equalization (the pipeline equalizes)
    image = synthetic.render_scene_image(
        bench.scene,
        bench.pinhole,
        bench.transform,
        remap=synthetic.gamma_remap(0.75),
        noise=0.02,
        rng=np.random.default_rng(seed + 1),
    )
    save_gray(image, root / "camera.png", bits=16)
    save_camera(bench.pinhole, root / "intrinsics.json")

    config = {
        "seed": seed,
        "mode": "static",
        "camera": "intrinsics.json",
        "output_dir": "out",
        "pairs": [
            {
                "clouds": ["scan0.ply", "scan1.ply"],
                "image": "camera.png",
                "correspondences": "matches.json",
            }
        ],
        "ransac": {"iterations": 5000, "threshold_px": 8.0},
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2))
    # placeholder so validation passes; real matches are written below
    save_correspondences(root / "matches.json", np.empty((0, 2)), np.empty((0, 3)))

    # run preprocessing + rendering once to harvest the index map the matcher
    # would have seen, then synthesize matches against it
    cfg = load_config(config_path)
    stage_preprocess(cfg)
    stage_fov(cfg)
    stage_render(cfg)
    index_map = load_index_map(root / "out" / "render" / "pair_00" / "index_map.bin")
    from lccalib.pointcloud import load_cloud

    cloud = load_cloud(root / "out" / "preprocess" / "pair_00" / "cloud.ply")

    occupied = np.argwhere(index_map.indices >= 0)
    rng.shuffle(occupied)
    cam = bench.pinhole
    good, bad = [], []
    want_good = int(round(n_matches * (1.0 - outlier_fraction)))
    for v, u in occupied:
        idx = int(index_map.indices[v, u])
        px, ok = cam.project(bench.transform.apply(cloud.points[idx]))
        if not ok or not (0 <= px[0] < cam.width and 0 <= px[1] < cam.height):
            continue
        noisy = np.clip(
            px + rng.normal(0, 1.0, 2), [0, 0], [cam.width - 1e-6, cam.height - 1e-6]
        )
        good.append((noisy, [float(u), float(v)]))
        if len(good) >= want_good:
            break
    for _ in range(n_matches - want_good):
        v, u = occupied[rng.integers(len(occupied))]
        bad.append(
            (
                rng.uniform([0, 0], [cam.width, cam.height]),
                [float(u), float(v)],
            )
        )
    matches = good + bad
    save_correspondences(
        root / "matches.json",
        np.asarray([m[0] for m in matches]),
        np.zeros((len(matches), 3)),  # unused: lidar_px takes precedence below
        lidar_pixels=np.asarray([m[1] for m in matches]),
        source="superglue",
        matcher_threshold=0.05,
    )
    # rewrite matches to drop lidar_point so the index-map path is exercised
    data = json.loads((root / "matches.json").read_text())
    for m in data["matches"]:
        m["lidar_point"] = None
    (root / "matches.json").write_text(json.dumps(data, indent=2))
    return config_path


@pytest.fixture(scope="session")
def pipeline_fixture(tmp_path_factory, bench) -> Path:
    root = tmp_path_factory.mktemp("pipeline_fixture")
    return build_pipeline_fixture(root, bench)


def ground_truth_picks(session, bench, count=8, noise_px=2.0, seed=3):
    """Clicks a careful operator could make: matched features within +-2 px."""
    rng = np.random.default_rng(seed)
    index_map = session.index_map
    cloud = session.pairs[0][0]
    cam = session.camera
    occupied = np.argwhere(index_map.indices >= 0)
    rng.shuffle(occupied)
    picks = []
    for v, u in occupied:
        idx = int(index_map.indices[v, u])
        px, ok = cam.project(bench.transform.apply(cloud.points[idx]))
        if not ok or not (8 < px[0] < cam.width - 8 and 8 < px[1] < cam.height - 8):
            continue
        noisy = px + rng.uniform(-noise_px, noise_px, 2)
        picks.append({"camera_px": noisy.tolist(), "lidar_px": [float(u), float(v)]})
        if len(picks) == count:
            break
    return picks
