"""2D-3D correspondence sets and their JSON file format.

File schema::

    {
      "source": "superglue" | "manual",
      "matcher_threshold": number | null,
      "matches": [
        {
          "camera_px": [u, v],
          "lidar_px": [u, v] | null,      # pixel on the rendered LiDAR image
          "lidar_point": [x, y, z] | null, # direct 3D point (LiDAR frame)
          "confidence": number             # optional, defaults to 1.0
        }, ...
      ]
    }

Each match needs ``camera_px`` plus at least one of ``lidar_px`` (resolved
through the virtual camera's index map) or ``lidar_point``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cameras import Camera
from .errors import SchemaError
from .pointcloud import PointCloud
from .virtual_camera import IndexMap

log = logging.getLogger(__name__)

_SOURCES = ("superglue", "manual")


@dataclass(eq=False)
class CorrespondenceSet:
    """Paired camera pixels and LiDAR-frame 3D points with per-pair confidence.

    ``lidar_pixels`` holds the pixel each pair occupied on the rendered LiDAR
    intensity image (NaN when the pair came as a direct 3D point); it is only
    used for match visualization.
    """

    pixels: np.ndarray
    points: np.ndarray
    confidence: np.ndarray
    source: str = "manual"
    matcher_threshold: float | None = None
    dropped: int = 0
    lidar_pixels: np.ndarray | None = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64).reshape(-1, 2)
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.confidence = np.asarray(self.confidence, dtype=np.float64).reshape(-1)
        if not (len(self.pixels) == len(self.points) == len(self.confidence)):
            raise ValueError("pixels, points, and confidence must have equal length")
        if self.lidar_pixels is not None:
            self.lidar_pixels = np.asarray(self.lidar_pixels, dtype=np.float64).reshape(-1, 2)
            if len(self.lidar_pixels) != len(self.pixels):
                raise ValueError("lidar_pixels must match pixels in length")

    def __len__(self) -> int:
        return len(self.pixels)

    @classmethod
    def empty(cls, source: str = "manual") -> "CorrespondenceSet":
        return cls(np.empty((0, 2)), np.empty((0, 3)), np.empty(0), source=source)

    def merged_with(self, other: "CorrespondenceSet") -> "CorrespondenceSet":
        if self.lidar_pixels is not None and other.lidar_pixels is not None:
            lidar_pixels = np.concatenate([self.lidar_pixels, other.lidar_pixels])
        else:
            lidar_pixels = None
        return CorrespondenceSet(
            np.concatenate([self.pixels, other.pixels]),
            np.concatenate([self.points, other.points]),
            np.concatenate([self.confidence, other.confidence]),
            source=self.source if self.source == other.source else "superglue",
            matcher_threshold=self.matcher_threshold,
            dropped=self.dropped + other.dropped,
            lidar_pixels=lidar_pixels,
        )


def _require(condition: bool, message: str):
    if not condition:
        raise SchemaError(message)


def _parse_match(i: int, match: dict) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None, float]:
    context = f"match {i}"
    _require(isinstance(match, dict), f"{context}: expected an object")
    camera_px = match.get("camera_px")
    _require(
        isinstance(camera_px, (list, tuple)) and len(camera_px) == 2,
        f"{context}: 'camera_px' must be [u, v]",
    )
    lidar_px = match.get("lidar_px")
    lidar_point = match.get("lidar_point")
    _require(
        lidar_px is not None or lidar_point is not None,
        f"{context}: one of 'lidar_px' or 'lidar_point' is required",
    )
    if lidar_px is not None:
        _require(
            isinstance(lidar_px, (list, tuple)) and len(lidar_px) == 2,
            f"{context}: 'lidar_px' must be [u, v]",
        )
        lidar_px = np.asarray(lidar_px, dtype=np.float64)
    if lidar_point is not None:
        _require(
            isinstance(lidar_point, (list, tuple)) and len(lidar_point) == 3,
            f"{context}: 'lidar_point' must be [x, y, z]",
        )
        lidar_point = np.asarray(lidar_point, dtype=np.float64)
    confidence = float(match.get("confidence", 1.0))
    return np.asarray(camera_px, dtype=np.float64), lidar_px, lidar_point, confidence


def import_correspondences(
    path, camera: Camera, index_map: IndexMap, cloud: PointCloud
) -> CorrespondenceSet:
    """Load a correspondence file, resolving LiDAR-image pixels to 3D points.

    A ``lidar_px`` entry is looked up in the index map, searching a 3x3 pixel
    window for the nearest non-empty entry; matches whose window is empty are
    dropped (counted on the returned set). Camera pixels must lie inside the
    camera image.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    _require(isinstance(data, dict), f"{path}: top level must be an object")
    source = data.get("source")
    _require(source in _SOURCES, f"{path}: 'source' must be one of {_SOURCES}")
    threshold = data.get("matcher_threshold")
    _require(
        threshold is None or isinstance(threshold, (int, float)),
        f"{path}: 'matcher_threshold' must be a number or null",
    )
    matches = data.get("matches")
    _require(isinstance(matches, list), f"{path}: 'matches' must be a list")

    pixels, points, confidences, lidar_pixels = [], [], [], []
    dropped = 0
    for i, match in enumerate(matches):
        camera_px, lidar_px, lidar_point, confidence = _parse_match(i, match)
        _require(
            0 <= camera_px[0] < camera.width and 0 <= camera_px[1] < camera.height,
            f"match {i}: camera_px {camera_px.tolist()} outside the {camera.width}x{camera.height} image",
        )
        if lidar_point is None:
            idx = index_map.lookup_window(lidar_px[0], lidar_px[1])
            if idx < 0:
                dropped += 1
                continue
            lidar_point = cloud.points[idx]
        pixels.append(camera_px)
        points.append(lidar_point)
        confidences.append(confidence)
        lidar_pixels.append(lidar_px if lidar_px is not None else np.full(2, np.nan))
    if dropped:
        log.warning("%s: dropped %d matches with no index-map entry nearby", path, dropped)
    if not pixels:
        return CorrespondenceSet.empty(source=source)
    return CorrespondenceSet(
        np.asarray(pixels),
        np.asarray(points),
        np.asarray(confidences),
        source=source,
        matcher_threshold=None if threshold is None else float(threshold),
        dropped=dropped,
        lidar_pixels=np.asarray(lidar_pixels),
    )


def save_correspondences(
    path,
    camera_pixels: np.ndarray,
    lidar_points: np.ndarray,
    *,
    lidar_pixels: np.ndarray | None = None,
    confidence: np.ndarray | None = None,
    source: str = "manual",
    matcher_threshold: float | None = None,
) -> None:
    """Write a correspondence file in the documented schema."""
    camera_pixels = np.asarray(camera_pixels, dtype=np.float64).reshape(-1, 2)
    lidar_points = np.asarray(lidar_points, dtype=np.float64).reshape(-1, 3)
    matches = []
    for i in range(len(camera_pixels)):
        match = {
            "camera_px": camera_pixels[i].tolist(),
            "lidar_px": None if lidar_pixels is None else list(np.asarray(lidar_pixels[i], dtype=float)),
            "lidar_point": lidar_points[i].tolist(),
            "confidence": 1.0 if confidence is None else float(confidence[i]),
        }
        matches.append(match)
    payload = {"source": source, "matcher_threshold": matcher_threshold, "matches": matches}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
