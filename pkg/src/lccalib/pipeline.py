"""End-to-end calibration pipeline, one stage per function.

Every stage reads its inputs from files written by the previous stage and
writes plain artifacts (PLY, PNG, JSON, binary index map), so stages run
individually from the CLI compose bit-for-bit identically to ``run_pipeline``
at the same seed.

Output layout under the config's output directory::

    preprocess/pair_00/{cloud.ply, image.png}
    render/{fov.json, pair_00/{lidar_image.png, index_map.bin, virtual_camera.json}}
    init_guess/{transform.json, matches.png}
    calibration/{result.json, overlay_pair_00.png}
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .cameras import Camera, camera_from_dict, camera_to_dict, load_camera
from .config import PipelineConfig
from .correspondences import CorrespondenceSet, import_correspondences
from .dynamic_integration import integrate_dynamic
from .errors import CalibrationError, InsufficientCorrespondencesError
from .fine_registration import calibrate_fine
from .geometry import RigidTransform
from .images import GrayImage, load_gray, save_gray, save_rgb
from .initial_guess import ransac_rotation, refine_reprojection
from .overlay import render_matches, render_overlay
from .pointcloud import PointCloud, load_cloud, save_cloud
from .preprocess import accumulate_static, equalize_cloud, equalize_image
from .virtual_camera import (
    IndexMap,
    estimate_fov,
    load_index_map,
    render_intensity,
    save_index_map,
    select_virtual_camera,
)

log = logging.getLogger(__name__)


def transform_to_dict(transform: RigidTransform) -> dict:
    return {
        "translation": transform.translation.tolist(),
        "quaternion_xyzw": transform.quaternion.tolist(),
        "matrix_row_major_4x4": transform.matrix().reshape(-1).tolist(),
    }


def transform_from_dict(data: dict) -> RigidTransform:
    return RigidTransform(
        np.asarray(data["quaternion_xyzw"], dtype=np.float64),
        np.asarray(data["translation"], dtype=np.float64),
    )


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _pair_dir(root: Path, stage: str, index: int) -> Path:
    d = root / stage / f"pair_{index:02d}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def stage_preprocess(config: PipelineConfig) -> list[tuple[Path, Path]]:
    """Densify and equalize each pair's cloud; equalize each camera image."""
    outputs = []
    for i, pair in enumerate(config.pairs):
        scans = [load_cloud(p) for p in pair.clouds]
        if config.mode == "dynamic" and len(scans) >= 2:
            cloud = integrate_dynamic(scans, config.make_ivox(), config.ct_icp)
        else:
            cloud = accumulate_static(scans)
        cloud = equalize_cloud(cloud)
        image = equalize_image(load_gray(pair.image))
        out = _pair_dir(config.output_dir, "preprocess", i)
        save_cloud(cloud, out / "cloud.ply")
        save_gray(image, out / "image.png", bits=16)
        outputs.append((out / "cloud.ply", out / "image.png"))
    return outputs


def _load_preprocessed(config: PipelineConfig, index: int) -> tuple[PointCloud, GrayImage]:
    out = config.output_dir / "preprocess" / f"pair_{index:02d}"
    cloud_path = out / "cloud.ply"
    image_path = out / "image.png"
    if not cloud_path.is_file() or not image_path.is_file():
        raise CalibrationError(
            f"missing preprocessed artifacts for pair {index}; run the preprocess stage first"
        )
    return load_cloud(cloud_path), load_gray(image_path)


def stage_fov(config: PipelineConfig) -> float:
    """Estimate the LiDAR FoV from the first preprocessed cloud."""
    cloud, _ = _load_preprocessed(config, 0)
    fov = estimate_fov(cloud, seed=config.seed)
    model = "pinhole" if fov < 150.0 else "equirectangular"
    _write_json(config.output_dir / "render" / "fov.json", {"fov_deg": fov, "model": model})
    return fov


def stage_render(config: PipelineConfig) -> None:
    """Render each pair's cloud through the selected virtual camera."""
    fov_path = config.output_dir / "render" / "fov.json"
    if not fov_path.is_file():
        raise CalibrationError("missing fov.json; run the fov stage first")
    fov = float(json.loads(fov_path.read_text())["fov_deg"])
    vc = config.virtual_camera
    for i in range(len(config.pairs)):
        cloud, _ = _load_preprocessed(config, i)
        setup = select_virtual_camera(
            fov,
            cloud,
            pinhole_size=vc.pinhole_size,
            equirect_size=vc.equirect_size,
            fov_margin=vc.fov_margin,
        )
        lidar_image, index_map = render_intensity(cloud, setup.camera, setup.pose)
        out = _pair_dir(config.output_dir, "render", i)
        save_gray(lidar_image, out / "lidar_image.png", bits=16)
        save_index_map(index_map, out / "index_map.bin")
        _write_json(
            out / "virtual_camera.json",
            {
                "camera": camera_to_dict(setup.camera),
                "pose": transform_to_dict(setup.pose),
            },
        )


def _load_render(config: PipelineConfig, index: int) -> tuple[Camera, RigidTransform, IndexMap]:
    out = config.output_dir / "render" / f"pair_{index:02d}"
    meta_path = out / "virtual_camera.json"
    if not meta_path.is_file():
        raise CalibrationError(f"missing render artifacts for pair {index}; run the render stage first")
    meta = json.loads(meta_path.read_text())
    return (
        camera_from_dict(meta["camera"]),
        transform_from_dict(meta["pose"]),
        load_index_map(out / "index_map.bin"),
    )


def gather_correspondences(config: PipelineConfig, camera: Camera) -> CorrespondenceSet:
    """Pool every pair's correspondence file into one set (multi-data calibration)."""
    pooled: CorrespondenceSet | None = None
    for i, pair in enumerate(config.pairs):
        if pair.correspondences is None:
            continue
        cloud, _ = _load_preprocessed(config, i)
        _, _, index_map = _load_render(config, i)
        current = import_correspondences(pair.correspondences, camera, index_map, cloud)
        pooled = current if pooled is None else pooled.merged_with(current)
    if pooled is None or len(pooled) == 0:
        raise InsufficientCorrespondencesError(
            "no correspondences available; provide correspondence files or create "
            "them manually with `lccalib serve`"
        )
    return pooled


def stage_init_guess(config: PipelineConfig) -> RigidTransform:
    """Pooled-correspondence RANSAC plus robust reprojection refinement."""
    camera = load_camera(config.camera_path)
    pooled = gather_correspondences(config, camera)
    result = ransac_rotation(pooled, camera, config.ransac)
    refined = refine_reprojection(
        pooled, camera, result.transform, kernel_scale=config.ransac.threshold_for(camera)
    )
    out = config.output_dir / "init_guess"
    _write_json(
        out / "transform.json",
        {
            "T_camera_lidar": transform_to_dict(refined),
            "inlier_count": result.inlier_count,
            "low_confidence": result.low_confidence,
            "correspondence_count": len(pooled),
        },
    )
    if pooled.lidar_pixels is not None and np.all(np.isfinite(pooled.lidar_pixels)):
        _, image = _load_preprocessed(config, 0)
        lidar_image = load_gray(config.output_dir / "render" / "pair_00" / "lidar_image.png")
        matches = render_matches(
            image, lidar_image, pooled.pixels, pooled.lidar_pixels, result.inliers
        )
        save_rgb(matches, out / "matches.png")
    return refined


def _initial_transform(config: PipelineConfig) -> RigidTransform:
    if config.init_transform is not None:
        return config.init_transform
    path = config.output_dir / "init_guess" / "transform.json"
    if not path.is_file():
        raise CalibrationError(
            "no initial transform: run the init-guess stage (or `lccalib serve` for "
            "manual correspondences), or set 'init_transform' in the config"
        )
    return transform_from_dict(json.loads(path.read_text())["T_camera_lidar"])


def stage_calibrate(config: PipelineConfig) -> Path:
    """NID-based fine registration over all pairs; writes the result file."""
    camera = load_camera(config.camera_path)
    pairs = [_load_preprocessed(config, i) for i in range(len(config.pairs))]
    initial = _initial_transform(config)
    result = calibrate_fine(pairs, camera, initial, config.fine)
    out = config.output_dir / "calibration"
    result_path = out / "result.json"
    _write_json(
        result_path,
        {
            "T_camera_lidar": transform_to_dict(result.transform),
            "final_nid": result.final_nid,
            "pairs_used": result.pairs_used,
            "outer_iterations": result.outer_iterations,
        },
    )
    cloud, image = pairs[0]
    save_rgb(render_overlay(cloud, image, camera, result.transform), out / "overlay_pair_00.png")
    return result_path


def run_pipeline(config: PipelineConfig) -> Path:
    """Run preprocess, render, init-guess, and fine registration in order.

    The init-guess stage is skipped when the config supplies an explicit
    initial transform and no correspondence files.
    """
    stage_preprocess(config)
    stage_fov(config)
    stage_render(config)
    has_correspondences = any(p.correspondences is not None for p in config.pairs)
    if has_correspondences:
        stage_init_guess(config)
    elif config.init_transform is None:
        raise InsufficientCorrespondencesError(
            "no correspondence files configured and no initial transform given; "
            "annotate correspondences manually with `lccalib serve`"
        )
    return stage_calibrate(config)
