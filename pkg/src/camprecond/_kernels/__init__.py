"""Hot projection kernels with a compiled backend and a numpy fallback.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
numpy implementation in ``_pure`` is selected.  Setting the environment
variable ``CAMPRECOND_PURE=1`` forces the fallback.  :func:`use_backend`
switches at runtime (tests and the benchmark compare both).
"""

from __future__ import annotations

import os

import numpy as np

from ..camera import Z_MIN
from ..errors import BehindCamera, NonFinite
from . import _pure

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"pure": _pure}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_active = _pure if (_ckernels is None or os.environ.get("CAMPRECOND_PURE") == "1") else _ckernels


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def backend_name() -> str:
    return "compiled" if _active is _ckernels and _ckernels is not None else "pure"


def use_backend(name: str) -> None:
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}") from None


def _prep(states, points, offsets):
    return (
        np.ascontiguousarray(states, dtype=np.float64),
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(offsets, dtype=np.int64),
    )


def _check(bad, z_min):
    if bad >= 0:
        raise BehindCamera(f"point {bad} has camera depth <= {z_min:g}")


def project(states, points, offsets, z_min: float = Z_MIN) -> np.ndarray:
    """Pixels ``(M, 2)`` for points grouped by camera through ``offsets``."""
    states, points, offsets = _prep(states, points, offsets)
    pix, bad = _active.project(states, points, offsets, z_min)
    _check(bad, z_min)
    return pix


def project_jacobian(states, dstates, points, offsets, z_min: float = Z_MIN):
    """Pixels ``(M, 2)`` and d(pixel)/d(delta) ``(M, 2, k)``."""
    states, points, offsets = _prep(states, points, offsets)
    dstates = np.ascontiguousarray(dstates, dtype=np.float64)
    pix, J, bad = _active.project_jacobian(states, dstates, points, offsets, z_min)
    _check(bad, z_min)
    if not (np.all(np.isfinite(pix)) and np.all(np.isfinite(J))):
        raise NonFinite("non-finite projection or Jacobian entry")
    return pix, J


def residual_gradient(states, dstates, points, offsets, observed, z_min: float = Z_MIN):
    """Per-camera sum of squared pixel residuals and ``sum_l J_l^T r_l``."""
    states, points, offsets = _prep(states, points, offsets)
    dstates = np.ascontiguousarray(dstates, dtype=np.float64)
    observed = np.ascontiguousarray(observed, dtype=np.float64)
    sse, grad, bad = _active.residual_gradient(states, dstates, points, offsets, observed, z_min)
    _check(bad, z_min)
    return sse, grad
