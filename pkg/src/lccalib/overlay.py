"""Diagnostic renderings: point-over-image overlays and match visualizations."""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw

from .cameras import Camera
from .geometry import RigidTransform
from .images import GrayImage
from .nid import hidden_point_removal
from .pointcloud import PointCloud
from .virtual_camera import project_to_pixels

_INLIER_COLOR = (40, 220, 40)
_OUTLIER_COLOR = (230, 40, 40)


def colormap(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] scalars to a blue-cyan-yellow-red ramp, as (N, 3) uint8."""
    t = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    r = np.clip(2.0 * t - 0.5, 0.0, 1.0)
    g = np.clip(1.5 - np.abs(2.0 * t - 1.0) * 1.5, 0.0, 1.0)
    b = np.clip(1.5 - 2.0 * t, 0.0, 1.0)
    return (np.stack([r, g, b], axis=-1) * 255.0).astype(np.uint8)


def render_overlay(
    cloud: PointCloud,
    image: GrayImage,
    camera: Camera,
    transform: RigidTransform,
    *,
    point_radius: int = 1,
) -> np.ndarray:
    """Camera image in grayscale with visible LiDAR points as colormapped dots.

    Visibility uses the same depth-buffer test as fine registration; an empty
    visible set returns the unmodified image.
    """
    base = np.round(np.clip(image.pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    out = np.stack([base, base, base], axis=-1)
    visible = hidden_point_removal(cloud, camera, transform)
    if len(visible) == 0:
        return out
    points_cam = transform.apply(cloud.points[visible])
    ui, vi, mask = project_to_pixels(camera, points_cam)
    colors = colormap(cloud.intensities[visible][mask])
    ui, vi = ui[mask], vi[mask]
    for du in range(-point_radius + 1, point_radius):
        for dv in range(-point_radius + 1, point_radius):
            uu = np.clip(ui + du, 0, camera.width - 1)
            vv = np.clip(vi + dv, 0, camera.height - 1)
            out[vv, uu] = colors
    return out


def overlay_consistency(
    cloud: PointCloud, image: GrayImage, camera: Camera, transform: RigidTransform
) -> float:
    """Mean absolute difference between projected point intensities and pixels.

    Low values mean the projection lines up with the image; used to sanity
    check a transform against perturbed alternatives.
    """
    visible = hidden_point_removal(cloud, camera, transform)
    if len(visible) == 0:
        return np.inf
    points_cam = transform.apply(cloud.points[visible])
    ui, vi, mask = project_to_pixels(camera, points_cam)
    if not np.any(mask):
        return np.inf
    diff = cloud.intensities[visible][mask] - image.pixels[vi[mask], ui[mask]]
    return float(np.mean(np.abs(diff)))


def render_matches(
    camera_image: GrayImage,
    lidar_image: GrayImage,
    camera_pixels: np.ndarray,
    lidar_pixels: np.ndarray,
    inlier_mask: np.ndarray,
) -> np.ndarray:
    """Side-by-side images with match lines, green for inliers and red for outliers."""
    h = max(camera_image.height, lidar_image.height)
    w = camera_image.width + lidar_image.width
    canvas = Image.new("RGB", (w, h), (0, 0, 0))

    def to_pil(img: GrayImage) -> Image.Image:
        return Image.fromarray((np.clip(img.pixels, 0, 1) * 255).astype(np.uint8), mode="L").convert("RGB")

    canvas.paste(to_pil(camera_image), (0, 0))
    canvas.paste(to_pil(lidar_image), (camera_image.width, 0))
    draw = ImageDraw.Draw(canvas)
    offset = camera_image.width
    for (cu, cv), (lu, lv), inlier in zip(
        np.asarray(camera_pixels), np.asarray(lidar_pixels), np.asarray(inlier_mask)
    ):
        color = _INLIER_COLOR if inlier else _OUTLIER_COLOR
        draw.line([(cu, cv), (lu + offset, lv)], fill=color, width=1)
        draw.ellipse([cu - 2, cv - 2, cu + 2, cv + 2], outline=color)
        draw.ellipse([lu + offset - 2, lv - 2, lu + offset + 2, lv + 2], outline=color)
    return np.asarray(canvas)
