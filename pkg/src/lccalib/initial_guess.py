"""Initial transform estimation from 2D-3D correspondences.

Rotation-only RANSAC: because the translation between the two sensors is
small relative to scene depth, two bearing-vector pairs suffice to
hypothesize the rotation (closed-form least-squares alignment with an SVD
reflection guard). Inliers are counted by reprojection error: pixel distance
for pinhole cameras, bearing angle for equirectangular ones (pixel metrics
degenerate near the poles).

The 6-DoF refinement then minimizes a Cauchy-robustified reprojection error
with Levenberg-Marquardt, starting from the RANSAC rotation and zero
translation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .cameras import Camera, EquirectCamera
from .correspondences import CorrespondenceSet
from .errors import DegenerateSampleError, InsufficientCorrespondencesError
from .geometry import RigidTransform, apply_perturbation, normalized

log = logging.getLogger(__name__)

_MIN_SAMPLE_ANGLE_RAD = 1e-4


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 10_000
    threshold_px: float = 20.0
    threshold_rad: float = 0.02
    seed: int = 0
    min_confident_inliers: int = 5

    def threshold_for(self, camera: Camera) -> float:
        return self.threshold_rad if isinstance(camera, EquirectCamera) else self.threshold_px


@dataclass(frozen=True)
class RansacResult:
    rotation: np.ndarray
    inliers: np.ndarray
    inlier_count: int
    low_confidence: bool

    @property
    def transform(self) -> RigidTransform:
        """The rotation as a transform with zero translation."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        return RigidTransform.from_matrix(m)


def rotation_from_two(
    c0: np.ndarray, c1: np.ndarray, l0: np.ndarray, l1: np.ndarray
) -> np.ndarray:
    """Least-squares rotation aligning two bearing pairs (camera <- LiDAR).

    Builds the 3x3 cross-covariance of the stacked bearings and solves by
    SVD with the determinant sign guard, minimizing sum ||c_i - R l_i||^2.
    Near-parallel pairs raise DegenerateSampleError.
    """
    c0, c1, l0, l1 = (np.asarray(v, dtype=np.float64).reshape(3) for v in (c0, c1, l0, l1))
    if _pair_angle(l0, l1) <= _MIN_SAMPLE_ANGLE_RAD or _pair_angle(c0, c1) <= _MIN_SAMPLE_ANGLE_RAD:
        raise DegenerateSampleError("sampled bearing pairs are near-parallel")
    h = np.outer(c0, l0) + np.outer(c1, l1)
    u, _, vt = np.linalg.svd(h)
    s = np.sign(np.linalg.det(u) * np.linalg.det(vt))
    return u @ np.diag([1.0, 1.0, s]) @ vt


def _pair_angle(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.arccos(np.clip(abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)), -1.0, 1.0)))


def _rotation_errors(
    camera: Camera,
    rotations: np.ndarray,
    points: np.ndarray,
    pixels: np.ndarray,
    camera_bearings: np.ndarray,
) -> np.ndarray:
    """Reprojection error of each hypothesis (H, 3, 3) against all pairs -> (H, M)."""
    rotated = np.einsum("hij,mj->hmi", rotations, points)
    h, m = rotated.shape[0], rotated.shape[1]
    if isinstance(camera, EquirectCamera):
        bearings = rotated / np.linalg.norm(rotated, axis=2, keepdims=True)
        cos = np.clip(np.einsum("hmi,mi->hm", bearings, camera_bearings), -1.0, 1.0)
        return np.arccos(cos)
    projected, valid = camera.project(rotated.reshape(-1, 3))
    err = np.linalg.norm(projected - np.tile(pixels, (h, 1)), axis=1)
    err[~valid] = np.inf
    return err.reshape(h, m)


def draw_sample_pairs(seed: int, iterations: int, count: int) -> np.ndarray:
    """Deterministic (iterations, 2) index pairs with distinct members."""
    rng = np.random.default_rng(seed)
    samples = rng.integers(0, count, size=(iterations, 2))
    for _ in range(64):
        same = samples[:, 0] == samples[:, 1]
        if not np.any(same):
            break
        samples[same, 1] = rng.integers(0, count, size=int(same.sum()))
    return samples


def ransac_rotation(
    correspondences: CorrespondenceSet,
    camera: Camera,
    params: RansacParams = RansacParams(),
    sample_indices: np.ndarray | None = None,
) -> RansacResult:
    """Rotation-only RANSAC over bearing-vector correspondences.

    Deterministic given the seed. ``sample_indices`` overrides the drawn
    (iterations, 2) minimal samples, for reproducibility studies. A best
    consensus below ``min_confident_inliers`` flags the result low-confidence.
    """
    m = len(correspondences)
    if m < 2:
        raise InsufficientCorrespondencesError(f"RANSAC needs at least 2 pairs, got {m}")
    camera_bearings = normalized(camera.unproject(correspondences.pixels))
    lidar_bearings = normalized(correspondences.points)
    threshold = params.threshold_for(camera)

    if sample_indices is None:
        sample_indices = draw_sample_pairs(params.seed, params.iterations, m)
    samples = np.asarray(sample_indices, dtype=np.int64).reshape(-1, 2)

    c0 = camera_bearings[samples[:, 0]]
    c1 = camera_bearings[samples[:, 1]]
    l0 = lidar_bearings[samples[:, 0]]
    l1 = lidar_bearings[samples[:, 1]]

    # Degenerate (near-parallel) samples are skipped rather than refitted;
    # the iteration budget is fixed so runs stay reproducible.
    dot_l = np.abs(np.einsum("ij,ij->i", l0, l1))
    dot_c = np.abs(np.einsum("ij,ij->i", c0, c1))
    usable = (dot_l < np.cos(_MIN_SAMPLE_ANGLE_RAD)) & (dot_c < np.cos(_MIN_SAMPLE_ANGLE_RAD))

    h = np.einsum("ni,nj->nij", c0, l0) + np.einsum("ni,nj->nij", c1, l1)
    u, _, vt = np.linalg.svd(h)
    sign = np.sign(np.linalg.det(u) * np.linalg.det(vt))
    u_fixed = u.copy()
    u_fixed[:, :, 2] *= sign[:, None]
    rotations = u_fixed @ vt

    best_count = -1
    best_rotation = None
    chunk = 512
    for start in range(0, len(rotations), chunk):
        stop = min(start + chunk, len(rotations))
        errors = _rotation_errors(
            camera, rotations[start:stop], correspondences.points, correspondences.pixels, camera_bearings
        )
        counts = np.where(usable[start:stop], np.sum(errors < threshold, axis=1), -1)
        local_best = int(np.argmax(counts))
        if counts[local_best] > best_count:
            best_count = int(counts[local_best])
            best_rotation = rotations[start + local_best]

    if best_rotation is None or best_count < 0:
        raise DegenerateSampleError("every RANSAC sample was degenerate")

    errors = _rotation_errors(
        camera, best_rotation[None], correspondences.points, correspondences.pixels, camera_bearings
    )[0]
    inliers = errors < threshold
    low_confidence = best_count < params.min_confident_inliers
    if low_confidence:
        log.warning(
            "RANSAC consensus is weak (%d inliers); treat the initial guess with suspicion",
            best_count,
        )
    return RansacResult(
        rotation=best_rotation,
        inliers=inliers,
        inlier_count=int(inliers.sum()),
        low_confidence=low_confidence,
    )


def _reprojection_residuals(
    camera: Camera, transform: RigidTransform, points: np.ndarray, pixels: np.ndarray,
    camera_bearings: np.ndarray | None,
) -> np.ndarray:
    """Stacked residual vector: 2-D pixel residuals (pinhole) or bearing angles."""
    transformed = transform.apply(points)
    if isinstance(camera, EquirectCamera):
        bearings = transformed / np.linalg.norm(transformed, axis=1, keepdims=True)
        cos = np.clip(np.einsum("ni,ni->n", bearings, camera_bearings), -1.0, 1.0)
        return np.arccos(cos)
    projected, valid = camera.project(transformed)
    residuals = (projected - pixels)[valid]
    return residuals.reshape(-1)


def _cauchy_cost(residual_sq: np.ndarray, c: float) -> float:
    return float(np.sum(c * c * np.log1p(residual_sq / (c * c))))


def refine_reprojection(
    correspondences: CorrespondenceSet,
    camera: Camera,
    initial: RigidTransform,
    *,
    kernel_scale: float | None = None,
    max_iterations: int = 100,
    update_tol: float = 1e-8,
) -> RigidTransform:
    """Minimize the Cauchy-robustified reprojection error with LM.

    ``kernel_scale`` defaults to the RANSAC inlier threshold for the camera
    model (pixels for pinhole, radians for equirectangular). Points that fall
    behind a pinhole camera during the search are skipped. On divergence the
    best transform so far is returned with a warning.
    """
    if len(correspondences) < 3:
        raise InsufficientCorrespondencesError(
            f"refinement needs at least 3 pairs, got {len(correspondences)}"
        )
    c = kernel_scale if kernel_scale is not None else RansacParams().threshold_for(camera)
    points = correspondences.points
    pixels = correspondences.pixels
    camera_bearings = (
        normalized(camera.unproject(pixels)) if isinstance(camera, EquirectCamera) else None
    )
    is_equirect = isinstance(camera, EquirectCamera)

    def robust_cost(transform: RigidTransform) -> float:
        r = _reprojection_residuals(camera, transform, points, pixels, camera_bearings)
        if r.size == 0:
            return np.inf
        if is_equirect:
            sq = r * r
        else:
            sq = np.sum(r.reshape(-1, 2) ** 2, axis=1)
        return _cauchy_cost(sq, c)

    def weighted_residuals(transform: RigidTransform) -> np.ndarray:
        r = _reprojection_residuals(camera, transform, points, pixels, camera_bearings)
        if is_equirect:
            sq = r * r
            weights = 1.0 / (1.0 + sq / (c * c))
            return r * np.sqrt(weights)
        pairs = r.reshape(-1, 2)
        sq = np.sum(pairs ** 2, axis=1)
        weights = 1.0 / (1.0 + sq / (c * c))
        return (pairs * np.sqrt(weights)[:, None]).reshape(-1)

    transform = initial
    cost = robust_cost(transform)
    best_transform, best_cost = transform, cost
    lam = 1e-3
    eps = 1e-7
    diverged = False
    for _ in range(max_iterations):
        r0 = weighted_residuals(transform)
        jac = np.empty((r0.size, 6))
        for j in range(6):
            step = np.zeros(6)
            step[j] = eps
            r_step = weighted_residuals(apply_perturbation(step, transform))
            if r_step.size != r0.size:
                # a point crossed the image plane; retreat the step
                r_step = r0
            jac[:, j] = (r_step - r0) / eps
        jtj = jac.T @ jac
        jtr = jac.T @ r0
        accepted = False
        delta = np.zeros(6)
        for _ in range(12):
            if lam > 1e10:
                break
            try:
                delta = np.linalg.solve(jtj + lam * np.eye(6), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            candidate = apply_perturbation(delta, transform)
            new_cost = robust_cost(candidate)
            if new_cost < cost:
                transform, cost = candidate, new_cost
                lam = max(lam * 0.3, 1e-12)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            diverged = cost > best_cost
            break
        if cost < best_cost:
            best_transform, best_cost = transform, cost
        if float(np.linalg.norm(delta)) < update_tol:
            break
    if diverged:
        log.warning("LM refinement stalled; returning the best transform found")
    return best_transform
