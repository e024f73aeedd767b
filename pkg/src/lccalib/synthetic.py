"""Procedural scenes with analytic ray casting, for tests, demos, and fixtures.

A scene is a set of axis-aligned rectangular faces (a room box, optionally a
pillar) plus a deterministic texture function over 3D position. Because
intersections are analytic, the same scene yields:

* LiDAR point clouds (surface samples visible from the sensor origin),
* camera images (per-pixel ray casting through any camera model),
* exact visibility and surface-distance oracles for tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial.transform import Rotation

from .cameras import Camera
from .geometry import RigidTransform
from .images import GrayImage
from .pointcloud import PointCloud

_EPS = 1e-9


def multiscale_texture(points: np.ndarray) -> np.ndarray:
    """Deterministic multi-frequency texture over 3D position, in [0, 1]."""
    p = np.atleast_2d(points)
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    value = (
        0.5
        + 0.18 * np.sin(2.0 * np.pi * (0.8 * x + 0.25) ) * np.cos(2.0 * np.pi * 0.55 * y)
        + 0.14 * np.sin(2.0 * np.pi * (1.1 * z + 0.35 * x) + 0.9)
        + 0.10 * np.sin(2.0 * np.pi * 2.1 * (x + y + z))
        + 0.08 * np.cos(2.0 * np.pi * (1.7 * y - 0.6 * z) + 0.4)
    )
    return np.clip(value, 0.0, 1.0)


def striped_texture(axis: int, periods=(1.2, 0.45)) -> Callable[[np.ndarray], np.ndarray]:
    """Texture varying along a single axis only (degenerate along the others)."""

    def texture(points: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(points)[:, axis]
        value = 0.5 + 0.25 * np.sin(2.0 * np.pi * t / periods[0]) + 0.25 * np.sin(
            2.0 * np.pi * t / periods[1] + 0.7
        )
        return np.clip(value, 0.0, 1.0)

    return texture


@dataclass(frozen=True)
class Face:
    """Axis-aligned rectangle: fixed coordinate on one axis, bounded on the others."""

    axis: int
    offset: float
    bounds: np.ndarray  # (2, 2) min/max over the two free axes

    @property
    def free_axes(self) -> tuple[int, int]:
        return tuple(a for a in range(3) if a != self.axis)

    def area(self) -> float:
        extents = self.bounds[1] - self.bounds[0]
        return float(extents[0] * extents[1])


class Scene:
    """A collection of faces with a texture; all geometry queries are vectorized."""

    def __init__(self, faces: list[Face], texture: Callable[[np.ndarray], np.ndarray] | None = None):
        if not faces:
            raise ValueError("a scene needs at least one face")
        self.faces = faces
        self.texture = texture if texture is not None else multiscale_texture

    def raycast(self, origins: np.ndarray, directions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """First-hit distances for rays; returns (t, hit_mask)."""
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        if origins.shape[0] == 1 and directions.shape[0] > 1:
            origins = np.broadcast_to(origins, directions.shape)
        best_t = np.full(directions.shape[0], np.inf)
        for face in self.faces:
            d_axis = directions[:, face.axis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (face.offset - origins[:, face.axis]) / d_axis
            hit = (np.abs(d_axis) > _EPS) & (t > 1e-6)
            if not np.any(hit):
                continue
            t_safe = np.where(hit, t, 0.0)
            p = origins + t_safe[:, None] * directions
            a0, a1 = face.free_axes
            inside = (
                hit
                & (p[:, a0] >= face.bounds[0, 0] - _EPS)
                & (p[:, a0] <= face.bounds[1, 0] + _EPS)
                & (p[:, a1] >= face.bounds[0, 1] - _EPS)
                & (p[:, a1] <= face.bounds[1, 1] + _EPS)
            )
            best_t = np.where(inside & (t < best_t), t, best_t)
        return best_t, np.isfinite(best_t)

    def visible_from(self, origin: np.ndarray, points: np.ndarray, tol: float = 1e-6) -> np.ndarray:
        """True where each point is the first scene intersection from ``origin``."""
        origin = np.asarray(origin, dtype=np.float64).reshape(3)
        delta = np.atleast_2d(points) - origin
        dist = np.linalg.norm(delta, axis=1)
        directions = delta / np.maximum(dist, _EPS)[:, None]
        t, hit = self.raycast(origin[None, :], directions)
        return hit & (np.abs(t - dist) < np.maximum(tol, 1e-6 * dist))

    def distance_to_surface(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the nearest face rectangle."""
        points = np.atleast_2d(points)
        best = np.full(len(points), np.inf)
        for face in self.faces:
            a0, a1 = face.free_axes
            d_plane = points[:, face.axis] - face.offset
            c0 = np.clip(points[:, a0], face.bounds[0, 0], face.bounds[1, 0])
            c1 = np.clip(points[:, a1], face.bounds[0, 1], face.bounds[1, 1])
            d = np.sqrt(
                d_plane**2 + (points[:, a0] - c0) ** 2 + (points[:, a1] - c1) ** 2
            )
            best = np.minimum(best, d)
        return best

    def sample_surface(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Area-weighted uniform samples over all faces."""
        areas = np.array([f.area() for f in self.faces])
        choice = rng.choice(len(self.faces), size=count, p=areas / areas.sum())
        out = np.empty((count, 3))
        for i, face in enumerate(self.faces):
            sel = choice == i
            n = int(sel.sum())
            if n == 0:
                continue
            a0, a1 = face.free_axes
            out[sel, face.axis] = face.offset
            out[sel, a0] = rng.uniform(face.bounds[0, 0], face.bounds[1, 0], n)
            out[sel, a1] = rng.uniform(face.bounds[0, 1], face.bounds[1, 1], n)
        return out


def box_faces(center: np.ndarray, half_sizes: np.ndarray) -> list[Face]:
    """The six faces of an axis-aligned box."""
    center = np.asarray(center, dtype=np.float64)
    half = np.asarray(half_sizes, dtype=np.float64)
    faces = []
    for axis in range(3):
        a0, a1 = (a for a in range(3) if a != axis)
        bounds = np.array(
            [
                [center[a0] - half[a0], center[a1] - half[a1]],
                [center[a0] + half[a0], center[a1] + half[a1]],
            ]
        )
        for side in (-1.0, 1.0):
            offset = center[axis] + side * half[axis]
            faces.append(Face(axis=axis, offset=offset, bounds=bounds))
    return faces


def make_room(
    half_sizes=(3.0, 3.0, 1.5),
    pillar: dict | None = None,
    texture: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Scene:
    """An empty room box around the origin, optionally with a rectangular pillar.

    ``pillar`` keys: center (x, y), half (x, y); the pillar spans floor to
    ceiling.
    """
    faces = box_faces(np.zeros(3), np.asarray(half_sizes))
    if pillar is not None:
        cx, cy = pillar["center"]
        hx, hy = pillar["half"]
        hz = half_sizes[2]
        faces.extend(box_faces(np.array([cx, cy, 0.0]), np.array([hx, hy, hz])))
    return Scene(faces, texture)


def make_cluttered_room(texture: Callable[[np.ndarray], np.ndarray] | None = None) -> Scene:
    """A 6 x 6 x 3 m room with pillars and boxes at assorted depths.

    The interior structure gives a camera looking along +x strong depth
    parallax, which conditions the full 6-DoF registration problem; this is
    the standard render-and-recover scene used by the test suite.
    """
    faces = box_faces(np.zeros(3), np.array([3.0, 3.0, 1.5]))
    faces += box_faces(np.array([1.8, -0.8, 0.0]), np.array([0.3, 0.3, 1.5]))
    faces += box_faces(np.array([1.5, 0.9, 0.0]), np.array([0.25, 0.25, 1.5]))
    faces += box_faces(np.array([2.2, 0.1, -1.2]), np.array([0.4, 0.5, 0.3]))
    faces += box_faces(np.array([1.1, 0.1, 1.1]), np.array([0.35, 0.3, 0.25]))
    faces += box_faces(np.array([2.5, -1.6, 0.4]), np.array([0.25, 0.25, 0.25]))
    return Scene(faces, texture)


def camera_along_x(translation=(0.05, -0.06, 0.1)) -> RigidTransform:
    """LiDAR-to-camera transform for a camera looking along LiDAR +x.

    Standard rig arrangement: camera z (forward) = LiDAR x, camera y (down)
    = LiDAR -z.
    """
    rotation = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
    m = np.eye(4)
    m[:3, :3] = rotation
    m[:3, 3] = translation
    return RigidTransform.from_matrix(m)


def make_wall(
    axis: int = 2,
    offset: float = 3.5,
    extent: float = 4.0,
    texture: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Scene:
    """A single wall perpendicular to ``axis`` at ``offset``, centered on it."""
    bounds = np.array([[-extent, -extent], [extent, extent]])
    return Scene([Face(axis=axis, offset=offset, bounds=bounds)], texture)


def sample_cloud(
    scene: Scene,
    count: int,
    rng: np.random.Generator,
    origin=(0.0, 0.0, 0.0),
) -> PointCloud:
    """Surface samples visible from ``origin``, with texture intensities.

    Points are in the sensor frame (origin subtracted), mimicking a LiDAR at
    the origin.
    """
    origin = np.asarray(origin, dtype=np.float64)
    collected = []
    remaining = count
    for _ in range(20):
        batch = scene.sample_surface(max(remaining * 2, 64), rng)
        visible = scene.visible_from(origin, batch)
        kept = batch[visible]
        if len(kept):
            collected.append(kept[:remaining])
            remaining = count - sum(len(c) for c in collected)
        if remaining <= 0:
            break
    points = np.concatenate(collected, axis=0)
    if len(points) < count:
        raise RuntimeError(f"could only sample {len(points)} visible points of {count}")
    return PointCloud(points - origin, scene.texture(points))


def render_scene_image(
    scene: Scene,
    camera: Camera,
    transform: RigidTransform,
    *,
    remap: Callable[[np.ndarray], np.ndarray] | None = None,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
    lidar_origin=(0.0, 0.0, 0.0),
    supersample: int = 1,
) -> GrayImage:
    """Ray-cast the scene into a camera image.

    ``transform`` maps LiDAR-frame points into the camera frame (the
    calibration unknown). ``remap`` is an optional monotone intensity map
    applied before additive Gaussian noise of standard deviation ``noise``.
    ``supersample`` casts an s x s subpixel grid per pixel and averages
    (poor-man's anti-aliasing for precision fixtures).
    """
    inv = transform.inverse()
    origin_lidar = inv.translation + np.asarray(lidar_origin, dtype=np.float64)
    us, vs = np.meshgrid(np.arange(camera.width), np.arange(camera.height))
    accumulated = np.zeros(camera.width * camera.height)
    s = max(int(supersample), 1)
    offsets = (np.arange(s) + 0.5) / s - 0.5
    for du in offsets:
        for dv in offsets:
            pixels = np.stack(
                [us.reshape(-1) + du, vs.reshape(-1) + dv], axis=1
            ).astype(np.float64)
            bearings_cam = camera.unproject(pixels)
            directions = bearings_cam @ inv.rotation_matrix().T
            t, hit = scene.raycast(origin_lidar[None, :], directions)
            values = np.zeros(len(pixels))
            if np.any(hit):
                hits = origin_lidar + t[hit, None] * directions[hit]
                values[hit] = scene.texture(hits)
            accumulated += values
    values = accumulated / (s * s)
    if remap is not None:
        values = remap(values)
    if noise > 0.0:
        if rng is None:
            raise ValueError("noise requires an rng")
        values = values + rng.normal(0.0, noise, size=values.shape)
    return GrayImage(np.clip(values, 0.0, 1.0).reshape(camera.height, camera.width))


def spinning_scans(
    scene: Scene,
    pose_pairs: list[tuple[RigidTransform, RigidTransform]],
    *,
    azimuth_steps: int = 400,
    elevations_deg=(-25.0, -15.0, -5.0, 5.0, 15.0, 25.0),
) -> list[PointCloud]:
    """Simulate a spinning LiDAR moving through the scene.

    Each scan sweeps azimuth over [0, 2pi) while the sensor moves from the
    pair's begin pose to its end pose (world frame); points are stored in the
    sensor frame at their capture time with normalized timestamps, i.e. the
    raw scans are motion-skewed exactly as a real sensor would record them.
    """
    elevations = np.radians(np.asarray(elevations_deg))
    scans = []
    for begin, end in pose_pairs:
        s = np.repeat(np.arange(azimuth_steps) / azimuth_steps, len(elevations))
        azimuth = 2.0 * np.pi * s
        elev = np.tile(elevations, azimuth_steps)
        body_dirs = np.stack(
            [
                np.cos(elev) * np.cos(azimuth),
                np.cos(elev) * np.sin(azimuth),
                np.sin(elev),
            ],
            axis=1,
        )
        pair_rel = (begin.rotation.inv() * end.rotation).as_rotvec()
        rot = begin.rotation * Rotation.from_rotvec(s[:, None] * pair_rel)
        trans = (1.0 - s)[:, None] * begin.translation + s[:, None] * end.translation
        world_dirs = rot.apply(body_dirs)
        t, hit = scene.raycast(trans, world_dirs)
        world_points = trans[hit] + t[hit, None] * world_dirs[hit]
        sensor_points = rot[hit].inv().apply(world_points - trans[hit])
        scans.append(
            PointCloud(sensor_points, scene.texture(world_points), s[hit])
        )
    return scans


def constant_velocity_pairs(
    count: int,
    translation_step=(0.0, 0.0, 0.02),
    rotation_step_deg=(0.5, 0.0, 0.0),
    *,
    static_first: bool = True,
) -> list[tuple[RigidTransform, RigidTransform]]:
    """Ground-truth begin/end pose pairs for a constant-velocity trajectory.

    With ``static_first`` the first scan is captured at rest, matching the
    integration assumption that the first scan defines an undistorted
    reference frame.
    """
    step = RigidTransform.from_rotvec(np.radians(rotation_step_deg), translation_step)
    pairs = []
    pose = RigidTransform.identity()
    for i in range(count):
        if i == 0 and static_first:
            pairs.append((pose, pose))
            continue
        nxt = pose @ step
        pairs.append((pose, nxt))
        pose = nxt
    return pairs


def nodding_pairs(count: int, amplitude_deg: float = 15.0) -> list[tuple[RigidTransform, RigidTransform]]:
    """Up-down nodding trajectory (pitch oscillation), first scan at rest."""
    pairs = []
    pose = RigidTransform.identity()
    for i in range(count):
        if i == 0:
            pairs.append((pose, pose))
            continue
        pitch = amplitude_deg * np.sin(2.0 * np.pi * i / max(count - 1, 1))
        prev_pitch = amplitude_deg * np.sin(2.0 * np.pi * (i - 1) / max(count - 1, 1))
        step = RigidTransform.from_rotvec(
            np.radians([0.0, pitch - prev_pitch, 0.0]), (0.0, 0.0, 0.01)
        )
        nxt = pose @ step
        pairs.append((pose, nxt))
        pose = nxt
    return pairs


def gamma_remap(exponent: float = 0.75) -> Callable[[np.ndarray], np.ndarray]:
    """A simple strictly monotone intensity remap."""

    def remap(values: np.ndarray) -> np.ndarray:
        return np.clip(values, 0.0, 1.0) ** exponent

    return remap
