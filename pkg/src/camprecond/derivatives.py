"""Jacobians of projected points with respect to residual camera parameters.

Two independent routes are provided.  :func:`jacobian` (``method="analytic"``)
differentiates the parameterization with forward-mode jets and chains through
the closed-form projection derivative in the compiled kernel.  The reference
route (``method="fd"``) takes central differences of realized cameras (the
batched form of :func:`~.parameterizations.apply`) followed by
:func:`~.camera.project`, sharing no derivative code with the analytic one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .camera import PinholeCamera, project
from .errors import BadLayout, NonFinite
from .parameterizations import BatchRealizer, ParamKind, _as_kind, apply

FD_STEP = 1e-5


@dataclass(frozen=True)
class ProjectionJacobian:
    matrix: np.ndarray  # (2m, k); rows 2l, 2l+1 are d(u_l, v_l)/d(delta)
    m: int
    kind: ParamKind


def _points(points) -> np.ndarray:
    pts = getattr(points, "points", points)
    return np.atleast_2d(np.asarray(pts, dtype=np.float64))


def fd_steps(delta: np.ndarray, scale: float = FD_STEP) -> np.ndarray:
    return scale * np.maximum(1.0, np.abs(delta))


def fd_jacobian(kind, base: PinholeCamera, delta, points, step: float = FD_STEP) -> np.ndarray:
    """Central-difference reference Jacobian, shape ``(2m, k)``."""
    kind = _as_kind(kind)
    x = _points(points)
    delta = np.asarray(delta, dtype=np.float64).ravel()
    if delta.shape != (kind.k,):
        raise BadLayout(f"{kind.name} expects {kind.k} residual entries, got {delta.size}")
    h = fd_steps(delta, step)
    E = np.diag(h)
    # All 2k probes realized in one batch; pixels come from the scalar camera model.
    realizer = BatchRealizer(kind, [base] * (2 * kind.k))
    states, _ = realizer.realize(np.concatenate([delta + E, delta - E]))
    cams = realizer.cameras(states)
    J = np.empty((2 * len(x), kind.k))
    for r in range(kind.k):
        plus = project(cams[r], x)
        minus = project(cams[kind.k + r], x)
        J[:, r] = ((plus - minus) / (2.0 * h[r])).ravel()
    if not np.all(np.isfinite(J)):
        raise NonFinite("finite-difference probe produced a non-finite pixel")
    return J


def analytic_jacobian(kind, base: PinholeCamera, delta, points) -> np.ndarray:
    kind = _as_kind(kind)
    x = _points(points)
    states, dstates = BatchRealizer(kind, [base]).realize(np.asarray(delta, dtype=np.float64).ravel(), jac=True)
    _, J = _kernels.project_jacobian(states, dstates, x, np.array([0, len(x)]))
    return J.reshape(2 * len(x), kind.k)


def jacobian(kind, base: PinholeCamera, delta, points, method: str = "analytic") -> ProjectionJacobian:
    kind = _as_kind(kind)
    if method == "analytic":
        J = analytic_jacobian(kind, base, delta, points)
    elif method == "fd":
        J = fd_jacobian(kind, base, delta, points)
    else:
        raise ValueError(f"unknown Jacobian method {method!r}")
    return ProjectionJacobian(J, J.shape[0] // 2, kind)


def reprojection_loss(kind, base: PinholeCamera, delta, points, observed) -> float:
    """Mean squared reprojection error ``(1/m) sum |pi(x_l) - p_l|^2``."""
    x = _points(points)
    r = project(apply(kind, base, delta), x) - np.asarray(observed, dtype=np.float64)
    return float(np.sum(r * r) / len(x))


def loss_gradient(kind, base: PinholeCamera, delta, points, observed) -> np.ndarray:
    """Gradient of :func:`reprojection_loss` with respect to ``delta``."""
    kind = _as_kind(kind)
    x = _points(points)
    observed = np.atleast_2d(np.asarray(observed, dtype=np.float64))
    states, dstates = BatchRealizer(kind, [base]).realize(np.asarray(delta, dtype=np.float64).ravel(), jac=True)
    _, g = _kernels.residual_gradient(states, dstates, x, np.array([0, len(x)]), observed)
    return (2.0 / len(x)) * g[0]
