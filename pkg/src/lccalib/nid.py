"""Normalized information distance between LiDAR and camera intensities.

Point and pixel intensities (both in [0, 1]) are binned into joint and
marginal histograms; the distance is

    NID = (H_joint - MI) / H_joint,    MI = H_lidar + H_image - H_joint,

with natural-log Shannon entropies. NID lies in [0, 1], is 0 for perfectly
co-occurring signals, and 1 for independent ones. Visibility is enforced
beforehand with a per-pixel minimum-range depth test (hidden point removal),
so occluded points cannot poison the joint histogram.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cameras import Camera
from .errors import NoOverlapError
from .geometry import RigidTransform
from .images import GrayImage
from .pointcloud import PointCloud
from .virtual_camera import depth_test, project_to_pixels


@dataclass(frozen=True, eq=False)
class IntensityHistograms:
    """Joint (B, B) count table plus its two marginals and the sample total."""

    joint: np.ndarray
    lidar_marginal: np.ndarray
    image_marginal: np.ndarray
    total: float

    @classmethod
    def from_joint(cls, joint: np.ndarray) -> "IntensityHistograms":
        joint = np.asarray(joint, dtype=np.float64)
        if joint.ndim != 2 or joint.shape[0] != joint.shape[1]:
            raise ValueError("joint table must be square")
        return cls(
            joint=joint,
            lidar_marginal=joint.sum(axis=1),
            image_marginal=joint.sum(axis=0),
            total=float(joint.sum()),
        )

    @property
    def bins(self) -> int:
        return self.joint.shape[0]


def intensity_bins(values: np.ndarray, bins: int) -> np.ndarray:
    """Hard binning of [0, 1] intensities: min(floor(v * B), B - 1)."""
    return np.minimum((np.asarray(values) * bins).astype(np.int64), bins - 1)


def hidden_point_removal(cloud: PointCloud, camera: Camera, transform: RigidTransform) -> np.ndarray:
    """Indices of cloud points that survive per-pixel depth-buffer testing.

    Projects every point at the camera's native resolution and keeps only the
    minimum-range point per pixel. Returns sorted indices (possibly empty).
    """
    if len(cloud) == 0:
        return np.empty(0, dtype=np.int64)
    points_cam = transform.apply(cloud.points)
    ui, vi, mask = project_to_pixels(camera, points_cam)
    if not np.any(mask):
        return np.empty(0, dtype=np.int64)
    flat = vi[mask] * camera.width + ui[mask]
    ranges = np.linalg.norm(points_cam[mask], axis=1)
    src = np.nonzero(mask)[0]
    _, winners = depth_test(flat, ranges, src)
    return np.sort(winners)


def build_histograms(
    cloud: PointCloud,
    visible: np.ndarray,
    image: GrayImage,
    camera: Camera,
    transform: RigidTransform,
    bins: int = 16,
) -> IntensityHistograms:
    """Accumulate joint counts of point intensity vs. looked-up pixel intensity.

    Only the ``visible`` points are considered; those projecting outside the
    image at ``transform`` are skipped. Raises NoOverlapError when nothing
    lands inside.
    """
    visible = np.asarray(visible, dtype=np.int64)
    points_cam = transform.apply(cloud.points[visible])
    ui, vi, mask = project_to_pixels(camera, points_cam)
    if not np.any(mask):
        raise NoOverlapError("no visible point projects inside the image")
    lidar_bin = intensity_bins(cloud.intensities[visible][mask], bins)
    image_bin = intensity_bins(image.pixels[vi[mask], ui[mask]], bins)
    joint = np.bincount(lidar_bin * bins + image_bin, minlength=bins * bins).astype(np.float64)
    return IntensityHistograms.from_joint(joint.reshape(bins, bins))


def entropy(counts: np.ndarray) -> float:
    """Shannon entropy of a count table, in nats (0 log 0 = 0)."""
    c = np.asarray(counts, dtype=np.float64).reshape(-1)
    total = c.sum()
    if total <= 0:
        raise ValueError("entropy requires a nonempty histogram")
    p = c[c > 0] / total
    return float(-np.sum(p * np.log(p)))


def nid(hist: IntensityHistograms) -> float:
    """Normalized information distance of the joint histogram, in [0, 1].

    A joint table with a single occupied cell has zero joint entropy; the
    distance is defined as 0 there.
    """
    h_joint = entropy(hist.joint)
    if h_joint == 0.0:
        return 0.0
    h_lidar = entropy(hist.lidar_marginal)
    h_image = entropy(hist.image_marginal)
    mutual = h_lidar + h_image - h_joint
    return (h_joint - mutual) / h_joint
