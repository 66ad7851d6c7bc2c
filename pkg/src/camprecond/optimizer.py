"""Adam with a log-decayed, cosine-warmed learning rate, and the variance
penalty that keeps per-camera intrinsics close to each other."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteGradient


@dataclass(frozen=True)
class Schedule:
    lr_start: float = 1e-3
    lr_end: float = 1e-4
    warmup_steps: int = 2500
    warmup_floor: float = 1e-8

    def __post_init__(self):
        if not (self.lr_start > 0 and self.lr_end > 0):
            raise ValueError("learning rates must be positive")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be non-negative")


def lr_at(sched: Schedule, t: int, total: int) -> float:
    if total <= 0 or not (0 <= t <= total):
        raise ValueError(f"need 0 <= t <= total and total > 0, got t={t}, total={total}")
    frac = t / total
    base = math.exp((1.0 - frac) * math.log(sched.lr_start) + frac * math.log(sched.lr_end))
    if sched.warmup_steps > 0:
        w = min(t / sched.warmup_steps, 1.0)
        warm = sched.warmup_floor + (1.0 - sched.warmup_floor) * 0.5 * (1.0 - math.cos(math.pi * w))
    else:
        warm = 1.0
    return base * warm


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, shape, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), 0, beta1, beta2, eps)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState, lr: float) -> np.ndarray:
    """One bias-corrected Adam update; mutates ``state`` and returns new params."""
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient("gradient contains non-finite entries")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (grad * grad)
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps)


# Column groups of the realized intrinsics block (fx, fy, u0, v0, k1, k2).
INTRINSIC_GROUPS = {"focal": (0, 1), "principal": (2, 3), "distortion": (4, 5)}
DEFAULT_SHARED_WEIGHTS = {"focal": 1e-1, "principal": 1e-2, "distortion": 1e-2}


@dataclass(frozen=True)
class SharedWeights:
    focal: float = 1e-1
    principal: float = 1e-2
    distortion: float = 1e-2

    def as_dict(self) -> dict:
        return {"focal": self.focal, "principal": self.principal, "distortion": self.distortion}


def shared_intrinsics_loss(intrinsics: np.ndarray, weights=None) -> tuple[float, np.ndarray]:
    """Weighted variance of the intrinsics across cameras.

    ``intrinsics`` has shape ``(n, 6)`` with columns fx, fy, u0, v0, k1, k2.
    Each group contributes ``w_g`` times the mean of its members' population
    variances.  Returns the loss and its gradient, shape ``(n, 6)``.
    """
    theta = np.asarray(intrinsics, dtype=np.float64)
    n = theta.shape[0]
    if n < 2:
        raise ValueError("shared intrinsics need at least two cameras")
    w = (weights.as_dict() if isinstance(weights, SharedWeights) else weights) or DEFAULT_SHARED_WEIGHTS
    # Deviations from camera 0 first: identical intrinsics give exact zeros.
    d = theta - theta[0]
    dev = d - np.mean(d, axis=0)
    loss = 0.0
    grad = np.zeros_like(theta)
    for name, cols in INTRINSIC_GROUPS.items():
        wg = float(w.get(name, 0.0))
        if wg == 0.0:
            continue
        cols = list(cols)
        scale = wg / len(cols)
        loss += scale * float(np.sum(dev[:, cols] ** 2)) / n
        grad[:, cols] = scale * (2.0 / n) * dev[:, cols]
    return loss, grad
