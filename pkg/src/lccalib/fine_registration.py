"""Fine LiDAR-camera registration by information-distance minimization.

The outer loop alternates view-based hidden point removal at the current
estimate with a derivative-free minimization of the summed per-pair NID over
a 6-vector local perturbation (translation delta plus rotation-vector delta,
left-composed onto the current transform). It stops once the accepted update
falls below the translation/rotation thresholds or the iteration cap is hit.
Inputs are expected preprocessed: cloud and image intensities equalized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cameras import Camera
from .errors import CalibrationFailedError, NoOverlapError
from .geometry import RigidTransform, apply_perturbation
from .images import GrayImage
from .nid import (
    IntensityHistograms,
    build_histograms,
    hidden_point_removal,
    intensity_bins,
    nid,
)
from .pointcloud import PointCloud
from .simplex import NelderMeadParams, nelder_mead
from .virtual_camera import project_to_pixels

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FineRegistrationParams:
    bins: int = 16
    max_outer_iterations: int = 10
    translation_tol: float = 1e-4
    rotation_tol_deg: float = 0.005
    nelder_mead: NelderMeadParams = field(default_factory=NelderMeadParams)


@dataclass(frozen=True)
class FineResult:
    transform: RigidTransform
    initial_nid: float
    final_nid: float
    outer_iterations: int
    pairs_used: int


class _PairCache:
    """Visible points of one pair, frozen for one outer iteration."""

    def __init__(self, cloud: PointCloud, image: GrayImage, visible: np.ndarray, bins: int):
        self.points = cloud.points[visible]
        self.lidar_bin = intensity_bins(cloud.intensities[visible], bins)
        self.image = image

    def nid_at(self, camera: Camera, transform: RigidTransform, bins: int) -> float:
        points_cam = transform.apply(self.points)
        ui, vi, mask = project_to_pixels(camera, points_cam)
        if not np.any(mask):
            raise NoOverlapError("pair lost image overlap")
        image_bin = intensity_bins(self.image.pixels[vi[mask], ui[mask]], bins)
        joint = np.bincount(
            self.lidar_bin[mask] * bins + image_bin, minlength=bins * bins
        ).astype(np.float64)
        return nid(IntensityHistograms.from_joint(joint.reshape(bins, bins)))


def _mean_nid(
    pairs: Sequence[tuple[PointCloud, GrayImage]],
    camera: Camera,
    transform: RigidTransform,
    bins: int,
) -> float:
    """Mean per-pair NID at ``transform`` with visibility recomputed there."""
    values = []
    for cloud, image in pairs:
        visible = hidden_point_removal(cloud, camera, transform)
        if len(visible) == 0:
            continue
        values.append(nid(build_histograms(cloud, visible, image, camera, transform, bins)))
    if not values:
        raise NoOverlapError("no pair overlaps the image at this transform")
    return float(np.mean(values))


def calibrate_fine(
    pairs: Sequence[tuple[PointCloud, GrayImage]],
    camera: Camera,
    initial: RigidTransform,
    params: FineRegistrationParams = FineRegistrationParams(),
) -> FineResult:
    """Refine the LiDAR-to-camera transform over one or more data pairs.

    Pairs that lose overlap at the current estimate are dropped for that
    iteration with a warning; if every pair fails, calibration aborts. The
    returned transform is the best (lowest mean NID) visited across outer
    iterations, so the objective never ends up above its value at ``initial``.
    """
    if len(pairs) == 0:
        raise ValueError("calibrate_fine requires at least one (cloud, image) pair")
    bins = params.bins
    rotation_tol = np.radians(params.rotation_tol_deg)

    transform = initial
    best_transform = initial
    best_nid = np.inf
    initial_nid = np.nan
    pairs_used = 0
    outer = 0

    for outer in range(1, params.max_outer_iterations + 1):
        caches: list[_PairCache] = []
        for index, (cloud, image) in enumerate(pairs):
            visible = hidden_point_removal(cloud, camera, transform)
            if len(visible) == 0:
                log.warning("pair %d has no visible points at this estimate; dropped", index)
                continue
            caches.append(_PairCache(cloud, image, visible, bins))
        if not caches:
            raise CalibrationFailedError("every pair lost overlap with the image")
        pairs_used = len(caches)

        def objective(xi: np.ndarray) -> float:
            candidate = apply_perturbation(xi, transform)
            total = 0.0
            for cache in caches:
                try:
                    total += cache.nid_at(camera, candidate, bins)
                except NoOverlapError:
                    return np.inf
            return total

        start_value = objective(np.zeros(6)) / pairs_used
        if outer == 1:
            initial_nid = start_value
        if start_value < best_nid:
            best_nid = start_value
            best_transform = transform

        xi_best = nelder_mead(objective, np.zeros(6), params.nelder_mead)
        transform = apply_perturbation(xi_best, transform)

        translation_update = float(np.linalg.norm(xi_best[:3]))
        rotation_update = float(np.linalg.norm(xi_best[3:]))
        if translation_update < params.translation_tol and rotation_update < rotation_tol:
            break

    final_value = _mean_nid(pairs, camera, transform, bins)
    if final_value < best_nid:
        best_nid = final_value
        best_transform = transform

    return FineResult(
        transform=best_transform,
        initial_nid=float(initial_nid),
        final_nid=float(best_nid),
        outer_iterations=outer,
        pairs_used=pairs_used,
    )
