"""Rotation and rigid-transform primitives.

Conventions
-----------
Rotations are plain ``(3, 3)`` float64 arrays acting on column vectors.  A
:class:`RigidTransform` maps world points into the camera frame,
``x_c = R @ x_w + t``.  Screw axes are 6-vectors ``(omega; v)`` with the
rotation part first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AngleNearPi, DegenerateBasis

SMALL_ANGLE = 1e-6
# Closed-form V(omega) coefficients lose digits to cancellation well before
# SMALL_ANGLE, so they switch to a series earlier.
SMALL_ANGLE_V = 1e-3
PI_MARGIN = 1e-3


def skew(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def vee(K: np.ndarray) -> np.ndarray:
    return np.array([K[2, 1], K[0, 2], K[1, 0]])


def _rodrigues_coeffs(theta: float) -> tuple[float, float]:
    """(sin t / t, (1 - cos t) / t^2) with a series branch near zero."""
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0
    half = np.sin(0.5 * theta)
    return np.sin(theta) / theta, 2.0 * half * half / (theta * theta)


def _v_coeff(theta: float) -> float:
    """(t - sin t) / t^3."""
    if theta < SMALL_ANGLE_V:
        t2 = theta * theta
        return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    return (theta - np.sin(theta)) / theta**3


def exp_so3(w) -> np.ndarray:
    """Rotation matrix for the axis-angle vector ``w`` (Rodrigues' formula)."""
    w = np.asarray(w, dtype=np.float64)
    theta = float(np.linalg.norm(w))
    a, b = _rodrigues_coeffs(theta)
    K = skew(w)
    return np.eye(3) + a * K + b * (K @ K)


def rotation_angle(R: np.ndarray) -> float:
    """Geodesic angle of ``R`` in radians, computed with atan2 for stability."""
    s = 0.5 * np.linalg.norm(vee(R - R.T))
    c = 0.5 * (np.trace(R) - 1.0)
    return float(np.arctan2(s, c))


def log_so3(R: np.ndarray) -> np.ndarray:
    """Inverse of :func:`exp_so3`.

    Raises :class:`AngleNearPi` when the rotation angle is within ``1e-3`` of
    pi, where the axis sign becomes ambiguous.
    """
    R = np.asarray(R, dtype=np.float64)
    theta = rotation_angle(R)
    if theta >= np.pi - PI_MARGIN:
        raise AngleNearPi(f"rotation angle {theta:.6f} too close to pi")
    axis_sin = 0.5 * vee(R - R.T)  # sin(theta) * axis
    if theta < SMALL_ANGLE:
        return axis_sin * (1.0 + theta * theta / 6.0)
    return axis_sin * (theta / np.sin(theta))


def exp_se3(S) -> "RigidTransform":
    S = np.asarray(S, dtype=np.float64)
    w, v = S[:3], S[3:]
    theta = float(np.linalg.norm(w))
    a, b = _rodrigues_coeffs(theta)
    c = _v_coeff(theta)
    K = skew(w)
    K2 = K @ K
    R = np.eye(3) + a * K + b * K2
    V = np.eye(3) + b * K + c * K2
    return RigidTransform(R, V @ v)


def log_se3(T: "RigidTransform") -> np.ndarray:
    w = log_so3(T.rotation)
    theta = float(np.linalg.norm(w))
    K = skew(w)
    if theta < SMALL_ANGLE_V:
        t2 = theta * theta
        d = 1.0 / 12.0 + t2 / 720.0
    else:
        a, b = _rodrigues_coeffs(theta)
        d = (1.0 - a / (2.0 * b)) / (theta * theta)
    V_inv = np.eye(3) - 0.5 * K + d * (K @ K)
    return np.concatenate([w, V_inv @ T.translation])


def rot6d_to_rotation(a) -> np.ndarray:
    """Gram-Schmidt map from a 6-vector to a rotation whose first two columns
    span the same oriented plane as ``a[:3]`` and ``a[3:]``."""
    a = np.asarray(a, dtype=np.float64)
    a1, a2 = a[:3], a[3:]
    n1 = np.linalg.norm(a1)
    n2 = np.linalg.norm(a2)
    if n1 < 1e-12 or n2 < 1e-12 or np.linalg.norm(np.cross(a1, a2)) <= 1e-9 * n1 * n2:
        raise DegenerateBasis("6D rotation vectors are zero or parallel")
    b1 = a1 / n1
    u2 = a2 - np.dot(b1, a2) * b1
    b2 = u2 / np.linalg.norm(u2)
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=1)


def rotation_to_rot6d(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    return np.concatenate([R[:, 0], R[:, 1]])


def look_at(position, target, up=(0.0, 1.0, 0.0)) -> "RigidTransform":
    """World-to-camera transform for a camera at ``position`` facing ``target``.

    Camera axes follow the image convention: x right, y down, z forward.
    """
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    nr = np.linalg.norm(right)
    if nr < 1e-9:
        raise DegenerateBasis("viewing direction parallel to the up vector")
    right /= nr
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    return RigidTransform(R, -R @ position)


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Transform points of shape ``(3,)`` or ``(m, 3)``."""
        x = np.asarray(x, dtype=np.float64)
        return x @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self after other``: x -> self(other(x))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def allclose(self, other: "RigidTransform", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0.0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0.0, atol=atol)
        )
