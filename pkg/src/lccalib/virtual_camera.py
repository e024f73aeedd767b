"""Virtual-camera rendering of a point cloud into an intensity image.

The LiDAR field of view decides the projection model: below 150 degrees a
zero-distortion virtual pinhole pointed along the cloud's mean bearing;
otherwise an equirectangular panorama. Rendering projects every point with a
per-pixel minimum-range depth test and keeps, alongside the intensity image,
an index map from pixels back to cloud point indices for 2D-3D lookup. No
interpolation or gap filling is applied.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .cameras import Camera, EquirectCamera, PinholeCamera
from .errors import SchemaError
from .geometry import RigidTransform
from .images import GrayImage
from .pointcloud import PointCloud

log = logging.getLogger(__name__)

EQUIRECT_FOV_THRESHOLD_DEG = 150.0


@dataclass(eq=False)
class IndexMap:
    """Per-pixel index into the source cloud; -1 marks an empty pixel."""

    indices: np.ndarray

    def __post_init__(self):
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int32)
        if self.indices.ndim != 2:
            raise ValueError("indices must be a 2-D array (height, width)")

    @property
    def width(self) -> int:
        return self.indices.shape[1]

    @property
    def height(self) -> int:
        return self.indices.shape[0]

    def lookup_window(self, u: float, v: float, radius: int = 1) -> int:
        """Nearest non-empty index within a (2*radius+1)^2 pixel window, else -1."""
        cu = int(np.rint(u))
        cv = int(np.rint(v))
        best = -1
        best_d2 = np.inf
        for dv in range(-radius, radius + 1):
            for du in range(-radius, radius + 1):
                x, y = cu + du, cv + dv
                if not (0 <= x < self.width and 0 <= y < self.height):
                    continue
                idx = int(self.indices[y, x])
                if idx < 0:
                    continue
                d2 = du * du + dv * dv
                if d2 < best_d2:
                    best_d2 = d2
                    best = idx
        return best


def save_index_map(index_map: IndexMap, path) -> None:
    """Binary layout: u32le width, u32le height, then i32le per pixel (-1 empty)."""
    with open(path, "wb") as f:
        f.write(struct.pack("<II", index_map.width, index_map.height))
        f.write(index_map.indices.astype("<i4").tobytes())


def load_index_map(path) -> IndexMap:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise SchemaError(f"{path}: truncated index map header")
    width, height = struct.unpack_from("<II", raw)
    body = np.frombuffer(raw, dtype="<i4", offset=8)
    if body.size != width * height:
        raise SchemaError(f"{path}: expected {width * height} entries, got {body.size}")
    return IndexMap(body.reshape(height, width).astype(np.int32))


def _max_pairwise_angle_deg(bearings: np.ndarray) -> float:
    # min cosine over all pairs == max angle; chunk rows to bound memory
    best = 1.0
    step = 2048
    for start in range(0, len(bearings), step):
        block = bearings[start : start + step]
        best = min(best, float(np.min(block @ bearings.T)))
    return float(np.degrees(np.arccos(np.clip(best, -1.0, 1.0))))


def estimate_fov(cloud: PointCloud, *, fallback_samples: int = 1000, seed: int = 0) -> float:
    """Angular field of view of the cloud as seen from the sensor origin, in degrees.

    The maximum pairwise bearing angle is realized by a pair of convex-hull
    vertices, so the hull (quickhull) reduces the brute-force search. A
    degenerate (coplanar/collinear) cloud falls back to a brute-force search
    over a random subsample, with a warning.
    """
    points = cloud.points
    vertices = None
    if len(points) >= 4:
        try:
            hull = ConvexHull(points)
            vertices = points[hull.vertices]
        except QhullError:
            vertices = None
    if vertices is None:
        log.warning("degenerate cloud geometry; falling back to brute-force FoV search")
        if len(points) > fallback_samples:
            rng = np.random.default_rng(seed)
            vertices = points[rng.choice(len(points), fallback_samples, replace=False)]
        else:
            vertices = points
    norms = np.linalg.norm(vertices, axis=1)
    vertices = vertices[norms > 1e-9]
    if len(vertices) < 2:
        raise ValueError("cannot estimate FoV from fewer than two off-origin points")
    bearings = vertices / np.linalg.norm(vertices, axis=1, keepdims=True)
    return _max_pairwise_angle_deg(bearings)


@dataclass(frozen=True)
class VirtualCameraSetup:
    """A projection model plus its orientation (LiDAR frame -> virtual camera frame)."""

    camera: Camera
    pose: RigidTransform


def _orientation_toward(mean_bearing: np.ndarray) -> RigidTransform:
    """Rotation whose +z (optical axis) is the given bearing, y pointing down.

    The LiDAR's +z axis is taken as world-up; if the bearing is nearly
    vertical, +x serves as the up reference instead.
    """
    z = mean_bearing / np.linalg.norm(mean_bearing)
    up = np.array([0.0, 0.0, 1.0])
    if abs(float(z @ up)) > 0.99:
        up = np.array([1.0, 0.0, 0.0])
    y = -(up - (up @ z) * z)
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    rotation = np.stack([x, y, z], axis=0)
    return RigidTransform.from_matrix(
        np.block([[rotation, np.zeros((3, 1))], [np.zeros((1, 3)), np.ones((1, 1))]])
    )


def select_virtual_camera(
    fov_deg: float,
    cloud: PointCloud,
    *,
    pinhole_size: tuple[int, int] = (1024, 1024),
    equirect_size: tuple[int, int] = (1920, 960),
    fov_margin: float = 1.05,
) -> VirtualCameraSetup:
    """Choose the rendering model for the estimated FoV.

    Below the 150-degree threshold: a square pinhole whose image diagonal
    spans the FoV with a small margin. At or above it: an equirectangular
    panorama. Both are oriented along the cloud's mean bearing.
    """
    if not 0.0 < fov_deg <= 180.0:
        raise ValueError(f"FoV must be in (0, 180], got {fov_deg}")
    norms = np.linalg.norm(cloud.points, axis=1)
    bearings = cloud.points[norms > 1e-9] / norms[norms > 1e-9, None]
    mean = bearings.mean(axis=0)
    if np.linalg.norm(mean) < 1e-9:
        mean = np.array([1.0, 0.0, 0.0])
    pose = _orientation_toward(mean)

    if fov_deg < EQUIRECT_FOV_THRESHOLD_DEG:
        width, height = pinhole_size
        half_diag_px = 0.5 * float(np.hypot(width, height))
        half_angle = np.radians(min(fov_deg * fov_margin, 179.0) / 2.0)
        focal = half_diag_px / np.tan(half_angle)
        camera: Camera = PinholeCamera(
            fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0, width=width, height=height
        )
    else:
        width, height = equirect_size
        camera = EquirectCamera(width=width, height=height)
    return VirtualCameraSetup(camera=camera, pose=pose)


def depth_test(
    pixel_flat: np.ndarray, ranges: np.ndarray, point_indices: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel minimum-range winners.

    Given flattened pixel ids, camera-frame ranges, and source point indices,
    returns ``(winner_pixels, winner_indices)`` with exact-range ties broken
    toward the lower point index.
    """
    order = np.lexsort((point_indices, ranges, pixel_flat))
    pix = pixel_flat[order]
    first = np.ones(len(pix), dtype=bool)
    first[1:] = pix[1:] != pix[:-1]
    return pix[first], point_indices[order][first]


def project_to_pixels(
    camera: Camera, points_cam: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project camera-frame points onto integer pixels.

    Returns ``(ui, vi, mask)`` where mask selects points that project in front
    of the camera and inside the image; ui/vi are only meaningful there.
    """
    pixels, valid = camera.project(points_cam)
    ui = np.full(len(points_cam), -1, dtype=np.int64)
    vi = np.full(len(points_cam), -1, dtype=np.int64)
    with np.errstate(invalid="ignore"):
        ui[valid] = np.rint(pixels[valid, 0]).astype(np.int64)
        vi[valid] = np.rint(pixels[valid, 1]).astype(np.int64)
    mask = valid & (ui >= 0) & (ui < camera.width) & (vi >= 0) & (vi < camera.height)
    return ui, vi, mask


def render_intensity(
    cloud: PointCloud, camera: Camera, pose: RigidTransform | None = None
) -> tuple[GrayImage, IndexMap]:
    """Render the cloud as an intensity image plus its pixel-to-point index map.

    Each point is projected and the minimum-range point wins each pixel;
    untouched pixels stay at intensity zero / index -1.
    """
    if pose is None:
        pose = RigidTransform.identity()
    image = np.zeros((camera.height, camera.width))
    indices = np.full((camera.height, camera.width), -1, dtype=np.int32)
    if len(cloud) == 0:
        return GrayImage(image), IndexMap(indices)

    points_cam = pose.apply(cloud.points)
    ui, vi, mask = project_to_pixels(camera, points_cam)
    if np.any(mask):
        flat = vi[mask] * camera.width + ui[mask]
        ranges = np.linalg.norm(points_cam[mask], axis=1)
        src = np.nonzero(mask)[0]
        win_pix, win_idx = depth_test(flat, ranges, src)
        image.reshape(-1)[win_pix] = cloud.intensities[win_idx]
        indices.reshape(-1)[win_pix] = win_idx
    return GrayImage(image), IndexMap(indices)
