"""Proxy scene points sampled inside a camera frustum."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .camera import PinholeCamera, unproject

DEFAULT_M = 1000
DEFAULT_NEAR = 0.2
DEFAULT_FAR = 100.0


def disparity_linear(s: np.ndarray, near: float, far: float) -> np.ndarray:
    """Depth whose inverse is linear in ``s``: dense near, sparse far."""
    return 1.0 / ((1.0 - s) / near + s / far)


@dataclass(frozen=True)
class ProxyPointSet:
    points: np.ndarray
    seed: int | None
    near: float
    far: float

    def __len__(self) -> int:
        return len(self.points)


def sample_frustum(
    cam: PinholeCamera,
    m: int = DEFAULT_M,
    near: float = DEFAULT_NEAR,
    far: float = DEFAULT_FAR,
    seed=0,
    depth_curve: Callable[[np.ndarray, float, float], np.ndarray] = disparity_linear,
) -> ProxyPointSet:
    """Sample ``m`` world points whose pixels are uniform over the image and whose
    normalized ray distances are uniform in [0, 1] before ``depth_curve``.

    ``seed`` may be anything accepted by :func:`numpy.random.default_rng`.
    """
    if not (0 < near < far):
        raise ValueError(f"need 0 < near < far, got near={near}, far={far}")
    if m < 1:
        raise ValueError("m must be positive")
    rng = np.random.default_rng(seed)
    uv = rng.uniform(0.0, 1.0, size=(m, 2)) * np.array([cam.width, cam.height], dtype=np.float64)
    s = rng.uniform(0.0, 1.0, size=m)
    depth = depth_curve(s, near, far)
    pts = unproject(cam, uv, depth)
    return ProxyPointSet(np.atleast_2d(pts), seed if isinstance(seed, int) else None, float(near), float(far))
