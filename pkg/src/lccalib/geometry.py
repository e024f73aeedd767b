"""SE(3) rigid transforms and small rotation helpers.

Conventions used throughout the toolkit:

* a transform ``T`` maps points from its source frame into its target frame
  as ``p_target = R @ p_source + t``;
* quaternions are stored in (x, y, z, w) order and kept normalized;
* a 6-vector tangent/perturbation ``xi`` is ``[dt_x, dt_y, dt_z, w_x, w_y, w_z]``
  with the rotation part as a rotation vector in radians. Perturbations are
  applied on the left: ``T_new = perturbation(xi) @ T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """An SE(3) element: unit quaternion (x, y, z, w) plus translation in meters."""

    quaternion: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.quaternion, dtype=np.float64).reshape(4)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        norm = float(np.linalg.norm(q))
        if norm < 1e-12:
            raise ValueError("quaternion norm is zero")
        object.__setattr__(self, "quaternion", _readonly(q / norm))
        object.__setattr__(self, "translation", _readonly(t))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.array([0.0, 0.0, 0.0, 1.0]), np.zeros(3))

    @classmethod
    def from_rotation(cls, rotation: Rotation, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls(rotation.as_quat(), np.asarray(translation, dtype=np.float64))

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls.from_rotation(Rotation.from_rotvec(np.asarray(rotvec, dtype=np.float64)), translation)

    @classmethod
    def from_matrix(cls, matrix) -> "RigidTransform":
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got {m.shape}")
        return cls.from_rotation(Rotation.from_matrix(m[:3, :3]), m[:3, 3])

    @property
    def rotation(self) -> Rotation:
        return Rotation.from_quat(self.quaternion)

    def rotation_matrix(self) -> np.ndarray:
        return self.rotation.as_matrix()

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation_matrix()
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Return self ∘ other (apply ``other`` first, then ``self``)."""
        r = self.rotation * other.rotation
        t = self.rotation.apply(other.translation) + self.translation
        return RigidTransform(r.as_quat(), t)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        r_inv = self.rotation.inv()
        return RigidTransform(r_inv.as_quat(), -r_inv.apply(self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one point (3,) or a stack of points (N, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return self.rotation.apply(p) + self.translation

    def interpolate(self, other: "RigidTransform", s: float) -> "RigidTransform":
        """Slerp the rotation and lerp the translation toward ``other`` at fraction ``s``."""
        rel = (self.rotation.inv() * other.rotation).as_rotvec()
        r = self.rotation * Rotation.from_rotvec(s * rel)
        t = (1.0 - s) * self.translation + s * other.translation
        return RigidTransform(r.as_quat(), t)

    def __repr__(self) -> str:
        q = np.array2string(self.quaternion, precision=6, suppress_small=True)
        t = np.array2string(self.translation, precision=6, suppress_small=True)
        return f"RigidTransform(quaternion={q}, translation={t})"


def perturbation(xi: np.ndarray) -> RigidTransform:
    """Build the transform (exp(w), dt) from a 6-vector [dt, w]."""
    xi = np.asarray(xi, dtype=np.float64).reshape(6)
    return RigidTransform.from_rotvec(xi[3:], xi[:3])


def apply_perturbation(xi: np.ndarray, transform: RigidTransform) -> RigidTransform:
    """Left-compose a 6-vector perturbation onto ``transform``."""
    return perturbation(xi) @ transform


def translation_distance(a: RigidTransform, b: RigidTransform) -> float:
    """Euclidean distance between the two translations, in meters."""
    return float(np.linalg.norm(a.translation - b.translation))


def rotation_distance_deg(a: RigidTransform, b: RigidTransform) -> float:
    """Geodesic angle between the two rotations, in degrees."""
    rel = a.rotation.inv() * b.rotation
    return float(np.degrees(np.linalg.norm(rel.as_rotvec())))


def normalized(vectors: np.ndarray) -> np.ndarray:
    """Scale vectors to unit norm along the last axis."""
    v = np.asarray(vectors, dtype=np.float64)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise ValueError("cannot normalize a zero vector")
    return v / norm
