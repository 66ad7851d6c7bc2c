"""Proxy-projection covariance and the whitening preconditioner built from it.

For a camera parameterization with Jacobian ``J`` of the stacked projections
of ``m`` proxy points, ``Sigma = J^T J`` measures how strongly each residual
parameter moves the image (diagonal) and how correlated those motions are
(off-diagonal).  The preconditioner

    P_inv = (Sigma + lam * diag(Sigma) + mu * I) ** -1/2

is the symmetric (ZCA) whitening transform of the dampened covariance.
Optimizing a latent ``phi`` with ``delta = P_inv @ phi`` gives a problem
whose Jacobian ``J @ P_inv`` has orthonormal columns when ``lam = mu = 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .camera import PinholeCamera
from .derivatives import analytic_jacobian
from .errors import DimensionMismatch, EmptyPointSet, NotPositiveDefinite
from .parameterizations import ParamKind, _as_kind, apply

DEFAULT_LAMBDA = 1e-1
DEFAULT_MU = 1e-8
EIG_FLOOR = 1e-12
_PAIRWISE_BLOCK = 256


class Mode(enum.Enum):
    FULL = "full"
    DIAGONAL = "diag"


@dataclass(frozen=True)
class Covariance:
    sigma: np.ndarray
    m: int
    kind: ParamKind


@dataclass(frozen=True)
class Preconditioner:
    p_inv: np.ndarray
    lam: float
    mu: float
    mode: Mode
    covariance: Covariance | None = None
    n_clamped: int = 0

    @property
    def k(self) -> int:
        return self.p_inv.shape[0]

    def to_json(self) -> dict:
        cov = self.covariance
        return {
            "kind": cov.kind.name if cov else None,
            "k": self.k,
            "m": cov.m if cov else None,
            "lambda": self.lam,
            "mu": self.mu,
            "mode": self.mode.value,
            "sigma": cov.sigma.tolist() if cov else None,
            "p_inv": self.p_inv.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Preconditioner":
        cov = None
        if obj.get("sigma") is not None:
            cov = Covariance(np.asarray(obj["sigma"], dtype=np.float64), obj["m"], ParamKind.parse(obj["kind"]))
        return cls(
            np.asarray(obj["p_inv"], dtype=np.float64),
            float(obj["lambda"]),
            float(obj["mu"]),
            Mode(obj.get("mode", "full")),
            cov,
        )


def gram(J: np.ndarray) -> np.ndarray:
    """``J^T J`` summed pairwise over row blocks."""
    if J.shape[0] <= _PAIRWISE_BLOCK:
        return J.T @ J
    half = (J.shape[0] // 2) & ~1  # keep (u, v) row pairs together
    return gram(J[:half]) + gram(J[half:])


def covariance(kind, base: PinholeCamera, points) -> Covariance:
    kind = _as_kind(kind)
    pts = np.atleast_2d(np.asarray(getattr(points, "points", points), dtype=np.float64))
    if pts.size == 0:
        raise EmptyPointSet("covariance needs at least one proxy point")
    J = analytic_jacobian(kind, base, np.zeros(kind.k), pts)
    S = gram(J)
    return Covariance(0.5 * (S + S.T), len(pts), kind)


def _dampened(sigma: np.ndarray, lam: float, mu: float) -> np.ndarray:
    return sigma + lam * np.diag(np.diag(sigma)) + mu * np.eye(sigma.shape[0])


def build(cov, lam: float = DEFAULT_LAMBDA, mu: float = DEFAULT_MU, mode=Mode.FULL) -> Preconditioner:
    """Inverse matrix square root of the dampened covariance.

    Eigenvalues below ``1e-12 * max(largest, mu)`` are raised to that floor
    before the -1/2 power; the number of raised eigenvalues is recorded.

    In full mode without clamping, one Newton step refines the result: eigh
    resolves small eigenvalues only to about ``eps * |Sd|``, which leaves
    ``P Sd P`` visibly off the identity on badly scaled covariances.
    """
    if lam < 0 or mu < 0:
        raise ValueError("dampening parameters must be non-negative")
    mode = Mode(mode) if not isinstance(mode, Mode) else mode
    sigma = cov.sigma if isinstance(cov, Covariance) else np.asarray(cov, dtype=np.float64)
    cov_obj = cov if isinstance(cov, Covariance) else None
    Sd = _dampened(sigma, lam, mu)
    if mode is Mode.FULL:
        evals, Q = np.linalg.eigh(Sd)
    else:
        evals, Q = np.diag(Sd).copy(), None
    floor = EIG_FLOOR * max(float(np.max(evals)), mu)
    clamped = evals < floor
    evals = np.where(clamped, floor, evals)
    if np.any(evals <= 0) or not np.all(np.isfinite(evals)):
        raise NotPositiveDefinite("dampened covariance has no positive spectrum to whiten")
    scale = 1.0 / np.sqrt(evals)
    if mode is Mode.FULL:
        P = (Q * scale) @ Q.T
        P = 0.5 * (P + P.T)
        if not np.any(clamped):
            # Solve dP Sd P + P Sd dP = -(P Sd P - I) in the eigenbasis of P.
            E = P @ Sd @ P
            E = 0.5 * (E + E.T) - np.eye(len(E))
            Ee = Q.T @ E @ Q
            dP = Q @ (-Ee * np.outer(scale, scale) / (scale[:, None] + scale[None, :])) @ Q.T
            P = P + 0.5 * (dP + dP.T)
    else:
        P = np.diag(scale)
    return Preconditioner(P, float(lam), float(mu), mode, cov_obj, int(np.count_nonzero(clamped)))


def identity(k: int) -> Preconditioner:
    return Preconditioner(np.eye(k), 0.0, 0.0, Mode.FULL)


class PreconditionedParameterization:
    """A parameterization over latent ``phi`` with ``delta = P_inv @ phi``."""

    def __init__(self, kind, base: PinholeCamera, precond: Preconditioner):
        self.kind = _as_kind(kind)
        if precond.p_inv.shape != (self.kind.k, self.kind.k):
            raise DimensionMismatch(
                f"preconditioner is {precond.p_inv.shape}, {self.kind.name} needs {(self.kind.k, self.kind.k)}"
            )
        self.base = base
        self.precond = precond

    @property
    def p_inv(self) -> np.ndarray:
        return self.precond.p_inv

    @property
    def k(self) -> int:
        return self.kind.k

    def residual(self, phi) -> np.ndarray:
        return self.p_inv @ np.asarray(phi, dtype=np.float64)

    def apply(self, phi) -> PinholeCamera:
        return apply(self.kind, self.base, self.residual(phi))

    def jacobian(self, phi, points) -> np.ndarray:
        return analytic_jacobian(self.kind, self.base, self.residual(phi), points) @ self.p_inv


def wrap(kind, base: PinholeCamera, precond: Preconditioner) -> PreconditionedParameterization:
    return PreconditionedParameterization(kind, base, precond)


def whitening_error(wrapped: PreconditionedParameterization, points) -> float:
    """``max |J~^T J~ - I|`` at the base camera."""
    Jt = wrapped.jacobian(np.zeros(wrapped.k), points)
    return float(np.max(np.abs(gram(Jt) - np.eye(wrapped.k))))


def motion_magnitudes(param, base: PinholeCamera | None, points) -> np.ndarray:
    """RMS pixel displacement per unit change of each parameter, ``sqrt(diag(Sigma) / m)``.

    ``param`` is either a kind (with ``base``) or a wrapped parameterization.
    """
    pts = np.atleast_2d(np.asarray(getattr(points, "points", points), dtype=np.float64))
    if pts.size == 0:
        raise EmptyPointSet("motion magnitudes need at least one proxy point")
    if isinstance(param, PreconditionedParameterization):
        J = param.jacobian(np.zeros(param.k), pts)
    else:
        kind = _as_kind(param)
        J = analytic_jacobian(kind, base, np.zeros(kind.k), pts)
    return np.sqrt(np.sum(J * J, axis=0) / len(pts))
