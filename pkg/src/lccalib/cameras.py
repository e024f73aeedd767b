"""Camera projection models: pinhole with plumb-bob distortion, and equirectangular.

Both models share the computer-vision camera frame (x right, y down,
z forward) and the same vectorized interface:

* ``project(points)`` maps camera-frame points to continuous pixel
  coordinates and returns ``(pixels, valid)``. Invalid entries (pinhole
  points at or behind the image plane) have NaN pixels and must be skipped
  by the caller, never clamped.
* ``unproject(pixels)`` maps pixels to unit bearing vectors.

The equirectangular convention: longitude is measured from +z toward +x,
latitude is positive upward (toward -y). ``u = (lon / 2pi + 0.5) * width``
and ``v = (0.5 - lat / pi) * height``, with u wrapped at the +-pi seam so
that 0 <= u < width.
"""

from __future__ import annotations

import abc
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NonConvergenceError, SchemaError

BEHIND_CAMERA_EPS = 1e-6
_DISTORTION_ITERATIONS = 20
_DISTORTION_TOL = 1e-10


class Camera(abc.ABC):
    """Common interface of all projection models."""

    model_name: str
    width: int
    height: int

    @abc.abstractmethod
    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project camera-frame points; returns (pixels, valid mask)."""

    @abc.abstractmethod
    def unproject(self, pixels: np.ndarray) -> np.ndarray:
        """Invert the projection; returns unit bearing vectors."""

    def contains(self, pixels: np.ndarray) -> np.ndarray:
        """True where continuous pixel coordinates fall inside the image."""
        px = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
        return (
            (px[:, 0] >= 0.0)
            & (px[:, 0] < self.width)
            & (px[:, 1] >= 0.0)
            & (px[:, 1] < self.height)
        )


def _as_points(points) -> tuple[np.ndarray, bool]:
    p = np.asarray(points, dtype=np.float64)
    single = p.ndim == 1
    return np.atleast_2d(p), single


@dataclass(frozen=True, eq=False)
class PinholeCamera(Camera):
    """Pinhole model with plumb-bob (radial k1,k2,k3 + tangential p1,p2) distortion."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0

    model_name = "pinhole"

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")

    def _distort(self, xn: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Radial factor and tangential offset at normalized coordinates (N, 2)."""
        x, y = xn[:, 0], xn[:, 1]
        r2 = x * x + y * y
        radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3))
        tangential = np.empty_like(xn)
        tangential[:, 0] = 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x)
        tangential[:, 1] = self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y
        return radial, tangential

    def _distort_jacobian(self, xn: np.ndarray) -> np.ndarray:
        """Jacobian of the distortion map at each normalized point, (N, 2, 2)."""
        x, y = xn[:, 0], xn[:, 1]
        r2 = x * x + y * y
        radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3))
        d_radial = self.k1 + r2 * (2.0 * self.k2 + 3.0 * self.k3 * r2)
        jac = np.empty((xn.shape[0], 2, 2))
        jac[:, 0, 0] = radial + 2.0 * x * x * d_radial + 2.0 * self.p1 * y + 6.0 * self.p2 * x
        jac[:, 0, 1] = 2.0 * x * y * d_radial + 2.0 * self.p1 * x + 2.0 * self.p2 * y
        jac[:, 1, 0] = jac[:, 0, 1]
        jac[:, 1, 1] = radial + 2.0 * y * y * d_radial + 6.0 * self.p1 * y + 2.0 * self.p2 * x
        return jac

    def project(self, points):
        p, single = _as_points(points)
        valid = p[:, 2] > BEHIND_CAMERA_EPS
        pixels = np.full((p.shape[0], 2), np.nan)
        if np.any(valid):
            xn = p[valid, :2] / p[valid, 2:3]
            radial, tangential = self._distort(xn)
            xd = xn * radial[:, None] + tangential
            pixels[valid, 0] = self.fx * xd[:, 0] + self.cx
            pixels[valid, 1] = self.fy * xd[:, 1] + self.cy
        if single:
            return pixels[0], bool(valid[0])
        return pixels, valid

    def unproject(self, pixels):
        px, single = _as_points(pixels)
        xd = np.empty((px.shape[0], 2))
        xd[:, 0] = (px[:, 0] - self.cx) / self.fx
        xd[:, 1] = (px[:, 1] - self.cy) / self.fy
        # Newton inversion of the plumb-bob distortion in normalized coords
        # (plain fixed-point iteration fails the 20-iteration budget near the
        # image corners at |k1| ~ 0.5).
        x = xd.copy()
        delta = np.zeros(px.shape[0])
        for _ in range(_DISTORTION_ITERATIONS):
            radial, tangential = self._distort(x)
            residual = x * radial[:, None] + tangential - xd
            jac = self._distort_jacobian(x)
            det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            det = np.where(np.abs(det) < 1e-12, 1e-12, det)
            step = np.empty_like(x)
            step[:, 0] = (jac[:, 1, 1] * residual[:, 0] - jac[:, 0, 1] * residual[:, 1]) / det
            step[:, 1] = (jac[:, 0, 0] * residual[:, 1] - jac[:, 1, 0] * residual[:, 0]) / det
            x = x - step
            delta = np.max(np.abs(step), axis=1)
            if np.all(delta < _DISTORTION_TOL):
                break
        else:
            bad = int(np.argmax(delta))
            raise NonConvergenceError(
                f"distortion inversion did not converge for pixel "
                f"({px[bad, 0]:.2f}, {px[bad, 1]:.2f})"
            )
        bearings = np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)
        bearings /= np.linalg.norm(bearings, axis=1, keepdims=True)
        return bearings[0] if single else bearings


@dataclass(frozen=True, eq=False)
class EquirectCamera(Camera):
    """Equirectangular full-sphere model on a 2:1 image."""

    width: int
    height: int

    model_name = "equirectangular"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if self.width != 2 * self.height:
            raise ValueError("equirectangular image must be 2:1 (width = 2 * height)")

    def project(self, points):
        p, single = _as_points(points)
        norm = np.linalg.norm(p, axis=1)
        if np.any(norm < 1e-12):
            raise ValueError("cannot project a zero-norm point with the equirectangular model")
        d = p / norm[:, None]
        lon = np.arctan2(d[:, 0], d[:, 2])
        lat = np.arcsin(np.clip(-d[:, 1], -1.0, 1.0))
        u = (lon / (2.0 * np.pi) + 0.5) * self.width
        v = (0.5 - lat / np.pi) * self.height
        # lon = +pi lands exactly on the seam; wrap so 0 <= u < width. The
        # nadir (lat = -pi/2) would give v = height; clamp just inside.
        u = np.where(u >= self.width, u - self.width, u)
        v = np.minimum(v, np.nextafter(float(self.height), 0.0))
        pixels = np.stack([u, v], axis=1)
        valid = np.ones(p.shape[0], dtype=bool)
        if single:
            return pixels[0], True
        return pixels, valid

    def unproject(self, pixels):
        px, single = _as_points(pixels)
        lon = (px[:, 0] / self.width - 0.5) * 2.0 * np.pi
        lat = (0.5 - px[:, 1] / self.height) * np.pi
        cos_lat = np.cos(lat)
        bearings = np.stack(
            [cos_lat * np.sin(lon), -np.sin(lat), cos_lat * np.cos(lon)], axis=1
        )
        return bearings[0] if single else bearings


def camera_to_dict(camera: Camera) -> dict:
    """Serialize a camera to the intrinsics-file schema."""
    if isinstance(camera, PinholeCamera):
        return {
            "model": "pinhole",
            "width": camera.width,
            "height": camera.height,
            "intrinsics": [camera.fx, camera.fy, camera.cx, camera.cy],
            "distortion": [camera.k1, camera.k2, camera.p1, camera.p2, camera.k3],
        }
    if isinstance(camera, EquirectCamera):
        return {
            "model": "equirectangular",
            "width": camera.width,
            "height": camera.height,
            "intrinsics": [],
            "distortion": [],
        }
    raise TypeError(f"unknown camera type {type(camera)!r}")


def camera_from_dict(data: dict) -> Camera:
    """Build a camera from the intrinsics-file schema.

    Schema: ``{"model": "pinhole"|"equirectangular", "width", "height",
    "intrinsics": [fx, fy, cx, cy], "distortion": [k1, k2, p1, p2, k3]}``;
    both arrays are empty for the equirectangular model.
    """
    try:
        model = data["model"]
        width = int(data["width"])
        height = int(data["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid camera intrinsics object: {exc}") from exc
    if model == "pinhole":
        intr = data.get("intrinsics", [])
        if len(intr) != 4:
            raise SchemaError("pinhole intrinsics must be [fx, fy, cx, cy]")
        dist = list(data.get("distortion", [])) or [0.0] * 5
        if len(dist) != 5:
            raise SchemaError("pinhole distortion must be [k1, k2, p1, p2, k3]")
        fx, fy, cx, cy = (float(x) for x in intr)
        k1, k2, p1, p2, k3 = (float(x) for x in dist)
        return PinholeCamera(
            fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height,
            k1=k1, k2=k2, k3=k3, p1=p1, p2=p2,
        )
    if model == "equirectangular":
        return EquirectCamera(width=width, height=height)
    raise SchemaError(f"unknown camera model {model!r}")


def load_camera(path) -> Camera:
    """Read a camera intrinsics JSON file."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return camera_from_dict(data)


def save_camera(camera: Camera, path) -> None:
    Path(path).write_text(json.dumps(camera_to_dict(camera), indent=2, sort_keys=True) + "\n")
