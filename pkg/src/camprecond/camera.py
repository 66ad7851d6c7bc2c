"""Pinhole camera with two-coefficient radial distortion.

A world point ``x`` maps to a pixel by

    x_c = R x + t
    n   = (x_c.x / z_c, x_c.y / z_c)
    d   = n (1 + k1 r^2 + k2 r^4),   r^2 = |n|^2
    p   = (fx d.x + u0, fy d.y + v0)

The arithmetic in :func:`project` is written out element by element in a
fixed order. The compiled kernels reproduce that order exactly, so a camera
projected here and through a kernel gives bitwise identical pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import BehindCamera, UndistortDiverged
from .geometry import RigidTransform

Z_MIN = 1e-6

# Packed camera state used by the parameterizations and the kernels.
STATE_SIZE = 18
STATE_R = slice(0, 9)
STATE_T = slice(9, 12)
FX, FY, U0, V0, K1, K2 = range(12, 18)
STATE_INTRINSICS = slice(12, 18)


@dataclass(frozen=True)
class PinholeCamera:
    fx: float
    fy: float
    u0: float
    v0: float
    k1: float = 0.0
    k2: float = 0.0
    pose: RigidTransform = RigidTransform.identity()
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image size must be positive")

    def state(self) -> np.ndarray:
        s = np.empty(STATE_SIZE)
        s[STATE_R] = self.pose.rotation.ravel()
        s[STATE_T] = self.pose.translation
        s[STATE_INTRINSICS] = (self.fx, self.fy, self.u0, self.v0, self.k1, self.k2)
        return s

    @classmethod
    def from_state(cls, state: np.ndarray, width: int, height: int) -> "PinholeCamera":
        state = np.asarray(state, dtype=np.float64)
        pose = RigidTransform(state[STATE_R].reshape(3, 3), state[STATE_T])
        fx, fy, u0, v0, k1, k2 = (float(v) for v in state[STATE_INTRINSICS])
        return cls(fx, fy, u0, v0, k1, k2, pose, width, height)

    def with_pose(self, pose: RigidTransform) -> "PinholeCamera":
        return replace(self, pose=pose)

    def max_field_difference(self, other: "PinholeCamera") -> float:
        return float(np.max(np.abs(self.state() - other.state())))


def project(cam: PinholeCamera, x, z_min: float = Z_MIN) -> np.ndarray:
    """Project world points of shape ``(3,)`` or ``(m, 3)`` to pixels."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    R = cam.pose.rotation
    t = cam.pose.translation
    px, py, pz = x[:, 0], x[:, 1], x[:, 2]
    X = R[0, 0] * px + R[0, 1] * py + R[0, 2] * pz + t[0]
    Y = R[1, 0] * px + R[1, 1] * py + R[1, 2] * pz + t[1]
    Z = R[2, 0] * px + R[2, 1] * py + R[2, 2] * pz + t[2]
    if np.any(~(Z > z_min)):
        bad = int(np.argmax(~(Z > z_min)))
        raise BehindCamera(f"point {bad} has camera depth {Z[bad]:.3g} <= {z_min:g}")
    nx = X / Z
    ny = Y / Z
    r2 = nx * nx + ny * ny
    D = 1.0 + cam.k1 * r2 + cam.k2 * (r2 * r2)
    u = cam.fx * (nx * D) + cam.u0
    v = cam.fy * (ny * D) + cam.v0
    out = np.stack([u, v], axis=1)
    return out[0] if single else out


def undistort(cam: PinholeCamera, d, max_iter: int = 20, tol: float = 1e-12) -> np.ndarray:
    """Invert the radial distortion on normalized coordinates ``d`` of shape
    ``(m, 2)`` by fixed-point iteration ``n <- d / D(|n|^2)``."""
    d = np.asarray(d, dtype=np.float64)
    n = d.copy()
    if cam.k1 == 0.0 and cam.k2 == 0.0:
        return n
    for _ in range(max_iter):
        r2 = np.sum(n * n, axis=1)
        n_next = d / (1.0 + cam.k1 * r2 + cam.k2 * r2 * r2)[:, None]
        step = np.max(np.abs(n_next - n)) if len(n) else 0.0
        n = n_next
        if step < tol:
            break
    r2 = np.sum(n * n, axis=1)
    residual = np.abs(n * (1.0 + cam.k1 * r2 + cam.k2 * r2 * r2)[:, None] - d)
    if residual.size and np.max(residual) > 1e-6:
        raise UndistortDiverged(f"undistortion residual {np.max(residual):.3g} after {max_iter} iterations")
    return n


def unproject(cam: PinholeCamera, p, depth) -> np.ndarray:
    """World point(s) at camera-frame depth ``depth`` behind pixel(s) ``p``."""
    p = np.asarray(p, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    depth = np.broadcast_to(np.asarray(depth, dtype=np.float64), (len(p),))
    if np.any(~(depth > 0)):
        raise ValueError("depth must be positive")
    d = np.stack([(p[:, 0] - cam.u0) / cam.fx, (p[:, 1] - cam.v0) / cam.fy], axis=1)
    n = undistort(cam, d)
    x_c = np.concatenate([n * depth[:, None], depth[:, None]], axis=1)
    x_w = cam.pose.inverse().apply(x_c)
    return x_w[0] if single else x_w
