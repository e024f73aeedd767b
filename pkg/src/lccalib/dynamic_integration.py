"""Densification of spinning-LiDAR data by continuous-time scan alignment.

Each scan carries per-point normalized timestamps in [0, 1]. Alignment
jointly estimates the sensor pose at the scan beginning and end; every point
is deskewed with the pose interpolated at its timestamp and matched against
a voxel map of previously integrated scans using point-to-plane residuals.
The first scan anchors the output frame at identity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InsufficientOverlapError
from .geometry import RigidTransform, apply_perturbation
from .ivox import LinearIVox
from .pointcloud import PointCloud
from .preprocess import accumulate_static

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScanPosePair:
    """Sensor poses at the beginning and end of one scan, in the map frame."""

    begin: RigidTransform
    end: RigidTransform

    @classmethod
    def identity(cls) -> "ScanPosePair":
        return cls(RigidTransform.identity(), RigidTransform.identity())


@dataclass(frozen=True)
class CtIcpParams:
    max_iterations: int = 30
    update_tol: float = 1e-6
    plane_neighbors: int = 10
    degenerate_eigen_ratio: float = 0.1
    min_residuals: int = 20
    max_residual_points: int = 2000
    # A neighborhood must be plane-like: thin along its normal, but spread in
    # two directions (ring-structured scans produce near-collinear neighbor
    # sets whose normals are meaningless).
    min_spread_ratio: float = 0.05
    # Trimmed association: matches whose point-to-plane distance is far beyond
    # the bulk are wrong-face associations near edges and are skipped for this
    # association round.
    trim_multiplier: float = 5.0
    trim_floor: float = 0.01
    # Weak motion regularization, as in continuous-time LiDAR odometry:
    # scans are contiguous, so the begin pose is anchored to the previous
    # scan's end, and the scan velocity to its extrapolated initialization.
    # Without these the per-time-slice geometry underdetermines the end pose.
    begin_anchor_weight: float = 2.0
    velocity_prior_weight: float = 1.0
    degenerate_time_weight: float = 1e-3
    deskew: bool = True


def interpolate_pose(pair: ScanPosePair, s: float) -> RigidTransform:
    """Pose at scan fraction ``s``: slerp rotation, lerp translation."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"interpolation fraction must be in [0, 1], got {s}")
    return pair.begin.interpolate(pair.end, s)


def _interp_apply(pair: ScanPosePair, s: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply the per-point interpolated pose to each point (vectorized)."""
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    rel = (pair.begin.rotation.inv() * pair.end.rotation).as_rotvec()
    rot = pair.begin.rotation * Rotation.from_rotvec(s[:, None] * rel)
    t = (1.0 - s)[:, None] * pair.begin.translation + s[:, None] * pair.end.translation
    return rot.apply(points) + t


def deskew(scan: PointCloud, pair: ScanPosePair) -> np.ndarray:
    """Motion-compensate a scan into the map frame using its pose pair."""
    if scan.times is None:
        raise ValueError("deskewing requires per-point times")
    return _interp_apply(pair, scan.times, scan.points)


def _relative_tangent(a: RigidTransform, b: RigidTransform) -> np.ndarray:
    rel = a.inverse() @ b
    return np.concatenate([rel.translation, rel.rotation.as_rotvec()])


def ct_icp_align(
    scan: PointCloud,
    ivox: LinearIVox,
    init: ScanPosePair,
    params: CtIcpParams = CtIcpParams(),
    cost_log: list | None = None,
) -> ScanPosePair:
    """Align one timestamped scan against the map, estimating begin/end poses.

    Levenberg-Marquardt over the stacked 12-dimensional tangent of both
    poses; point-to-plane residuals are re-associated each iteration. When
    all timestamps coincide the end pose is tied to the begin pose by a weak
    prior so the joint problem stays well-posed.

    Raises InsufficientOverlapError when fewer than ``params.min_residuals``
    scan points find a usable planar neighborhood.
    """
    if scan.times is None:
        raise ValueError("ct_icp_align requires per-point times")
    if len(ivox) == 0:
        raise InsufficientOverlapError("the map is empty")

    n = len(scan)
    if n > params.max_residual_points:
        sub = np.unique(np.linspace(0, n - 1, params.max_residual_points).astype(np.int64))
    else:
        sub = np.arange(n)
    pts = scan.points[sub]
    s = scan.times[sub]
    degenerate_times = float(np.ptp(scan.times)) < 1e-9

    init_velocity = _relative_tangent(init.begin, init.end)
    pair = init
    lam = 1e-4
    k = params.plane_neighbors
    steps_taken = 0
    while steps_taken < params.max_iterations:
        # Associate at the current estimate.
        world = _interp_apply(pair, s, pts)
        neighbors, counts = ivox.knn_batch(world, k)
        usable = counts >= k
        if not np.any(usable):
            raise InsufficientOverlapError("no scan point has a full map neighborhood")
        nb = neighbors[usable]
        centered = nb - nb.mean(axis=1, keepdims=True)
        cov = np.einsum("nki,nkj->nij", centered, centered) / k
        evals, evecs = np.linalg.eigh(cov)
        thin = evals[:, 0] / np.maximum(evals[:, 1], 1e-12) <= params.degenerate_eigen_ratio
        spread = evals[:, 1] / np.maximum(evals[:, 2], 1e-12) >= params.min_spread_ratio
        planar = (evals[:, 1] > 1e-12) & thin & spread
        if int(planar.sum()) < params.min_residuals:
            raise InsufficientOverlapError(
                f"only {int(planar.sum())} valid point-to-plane residuals "
                f"(need {params.min_residuals})"
            )
        p_act = pts[usable][planar]
        s_act = s[usable][planar]
        normals = evecs[planar][:, :, 0]
        anchors = nb[planar][:, 0, :]

        r_assoc = np.einsum("ni,ni->n", normals, world[usable][planar] - anchors)
        gate = max(params.trim_multiplier * float(np.median(np.abs(r_assoc))), params.trim_floor)
        keep = np.abs(r_assoc) <= gate
        if int(keep.sum()) < params.min_residuals:
            raise InsufficientOverlapError(
                f"only {int(keep.sum())} consistent point-to-plane residuals "
                f"(need {params.min_residuals})"
            )
        p_act, s_act, normals, anchors = p_act[keep], s_act[keep], normals[keep], anchors[keep]

        def residuals(xi: np.ndarray, base: ScanPosePair) -> np.ndarray:
            begin = apply_perturbation(xi[:6], base.begin)
            end = apply_perturbation(xi[6:], base.end)
            q = _interp_apply(ScanPosePair(begin, end), s_act, p_act)
            r = np.einsum("ni,ni->n", normals, q - anchors)
            priors = [
                params.begin_anchor_weight * _relative_tangent(init.begin, begin),
                params.velocity_prior_weight
                * (_relative_tangent(begin, end) - init_velocity),
            ]
            if degenerate_times:
                priors.append(params.degenerate_time_weight * _relative_tangent(begin, end))
            return np.concatenate([r] + priors)

        # Several LM steps on this association before re-matching; a fresh
        # association that admits no improving step means convergence.
        lam = min(lam, 1.0)
        converged = False
        improved_any = False
        for _ in range(5):
            if steps_taken >= params.max_iterations:
                break
            r0 = residuals(np.zeros(12), pair)
            cost0 = float(r0 @ r0)
            jac = np.empty((len(r0), 12))
            eps = 1e-6
            for j in range(12):
                step = np.zeros(12)
                step[j] = eps
                jac[:, j] = (residuals(step, pair) - r0) / eps
            jtj = jac.T @ jac
            jtr = jac.T @ r0
            accepted = False
            delta = np.zeros(12)
            for _ in range(10):
                try:
                    delta = np.linalg.solve(jtj + lam * np.eye(12), -jtr)
                except np.linalg.LinAlgError:
                    lam *= 10.0
                    continue
                r1 = residuals(delta, pair)
                cost1 = float(r1 @ r1)
                if cost1 < cost0:
                    accepted = True
                    lam = max(lam * 0.5, 1e-10)
                    if cost_log is not None:
                        cost_log.append((cost0, cost1))
                    break
                lam *= 10.0
            if not accepted:
                break
            improved_any = True
            steps_taken += 1
            pair = ScanPosePair(
                apply_perturbation(delta[:6], pair.begin),
                apply_perturbation(delta[6:], pair.end),
            )
            if float(np.linalg.norm(delta)) < params.update_tol:
                converged = True
                break
        if converged or not improved_any:
            break
    return pair


def integrate_dynamic(
    scans: list[PointCloud],
    ivox_template: LinearIVox | None = None,
    params: CtIcpParams = CtIcpParams(),
) -> PointCloud:
    """Deskew and accumulate timestamped scans in the frame of the first scan.

    Scans missing time fields fall back to plain static accumulation with a
    warning. Pose initialization extrapolates the previous scan's motion at
    constant velocity.
    """
    if len(scans) < 2:
        raise ValueError("dynamic integration requires at least two scans")
    if any(s.times is None for s in scans):
        log.warning("scans lack per-point times; falling back to static accumulation")
        return accumulate_static(scans)

    ivox = ivox_template if ivox_template is not None else LinearIVox()
    if len(ivox):
        raise ValueError("ivox_template must be an empty map")
    ivox.insert(scans[0].points)
    out_points = [scans[0].points]
    out_intensities = [scans[0].intensities]

    prev = ScanPosePair.identity()
    for i, scan in enumerate(scans[1:], start=1):
        step = prev.begin.inverse() @ prev.end
        init = ScanPosePair(prev.end, prev.end @ step)
        try:
            pair = ct_icp_align(scan, ivox, init, params)
        except InsufficientOverlapError as exc:
            raise InsufficientOverlapError(f"scan {i}: {exc}") from exc
        if params.deskew:
            world = deskew(scan, pair)
        else:
            world = pair.begin.apply(scan.points)
        ivox.insert(world)
        out_points.append(world)
        out_intensities.append(scan.intensities)
        prev = pair

    return PointCloud(np.concatenate(out_points), np.concatenate(out_intensities))
