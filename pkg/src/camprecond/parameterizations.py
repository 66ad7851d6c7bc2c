"""Residual camera parameterizations.

Each :class:`ParamKind` maps a residual vector ``delta`` of length ``k`` and a
base camera to a realized camera.  Residual layouts are fixed: pose block,
then focal, then principal point, then distortion.

=========================  ==  ==============================================
name                       k   layout
=========================  ==  ==============================================
``se3``                    6   screw axis (w_x, w_y, w_z, v_x, v_y, v_z)
``se3_focal``              7   + focal
``se3_focal_pp``           9   + u0, v0
``se3_focal_intrinsics``   11  + k1, k2
``focal_pose``             7   w_x, w_y, w_z, x, y, z, focal
``focal_pose_intrinsics``  11  + u0, v0, k1, k2
``scnerf``                 15  a1..a6, t_x, t_y, t_z, f_u, f_v, u0, v0, k1, k2
=========================  ==  ==============================================

Suffix flags: ``+pix`` multiplies additive pixel-valued residuals (focal,
principal point, FocalPose x/y) by the base ``fx``; ``+log`` turns additive
focal residuals, and SCNeRF's depth residual, into log-scale factors.
FocalPose focal and depth are log-scale regardless of the flag.

:class:`BatchRealizer` evaluates many cameras of one kind at once and can
return exact derivatives of every camera field through :mod:`.jet`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import jet
from .camera import FX, STATE_SIZE, STATE_T, PinholeCamera
from .errors import BadLayout, DegenerateBasis, InvalidBase
from .geometry import SMALL_ANGLE, SMALL_ANGLE_V, log_se3, log_so3, rotation_to_rot6d
from .jet import Jet


class Family(enum.Enum):
    SE3 = "se3"
    SE3_FOCAL = "se3_focal"
    SE3_FOCAL_PP = "se3_focal_pp"
    SE3_FOCAL_INTRINSICS = "se3_focal_intrinsics"
    FOCAL_POSE = "focal_pose"
    FOCAL_POSE_INTRINSICS = "focal_pose_intrinsics"
    SCNERF = "scnerf"


_LAYOUTS = {
    Family.SE3: ["w_x", "w_y", "w_z", "v_x", "v_y", "v_z"],
    Family.SE3_FOCAL: ["w_x", "w_y", "w_z", "v_x", "v_y", "v_z", "focal"],
    Family.SE3_FOCAL_PP: ["w_x", "w_y", "w_z", "v_x", "v_y", "v_z", "focal", "u0", "v0"],
    Family.SE3_FOCAL_INTRINSICS: ["w_x", "w_y", "w_z", "v_x", "v_y", "v_z", "focal", "u0", "v0", "k1", "k2"],
    Family.FOCAL_POSE: ["w_x", "w_y", "w_z", "x", "y", "z", "focal"],
    Family.FOCAL_POSE_INTRINSICS: ["w_x", "w_y", "w_z", "x", "y", "z", "focal", "u0", "v0", "k1", "k2"],
    Family.SCNERF: ["a1", "a2", "a3", "a4", "a5", "a6", "t_x", "t_y", "t_z", "f_u", "f_v", "u0", "v0", "k1", "k2"],
}

SE3_FAMILIES = (Family.SE3, Family.SE3_FOCAL, Family.SE3_FOCAL_PP, Family.SE3_FOCAL_INTRINSICS)
FOCAL_POSE_FAMILIES = (Family.FOCAL_POSE, Family.FOCAL_POSE_INTRINSICS)


@dataclass(frozen=True)
class ParamKind:
    family: Family
    pixel_scale: bool = False
    log_scale: bool = False

    @classmethod
    def parse(cls, name: str) -> "ParamKind":
        base, *flags = name.strip().split("+")
        try:
            family = Family(base)
        except ValueError:
            raise ValueError(f"unknown parameterization {base!r}") from None
        unknown = set(flags) - {"pix", "log"}
        if unknown:
            raise ValueError(f"unknown parameterization flags {sorted(unknown)}")
        return cls(family, "pix" in flags, "log" in flags)

    @property
    def flags(self) -> str:
        return ("+pix" if self.pixel_scale else "") + ("+log" if self.log_scale else "")

    @property
    def name(self) -> str:
        return self.family.value + self.flags

    @property
    def k(self) -> int:
        return len(_LAYOUTS[self.family])

    @property
    def layout(self) -> list[str]:
        return list(_LAYOUTS[self.family])

    def __str__(self) -> str:
        return self.name


ALL_FAMILIES = list(Family)


def all_kinds() -> list[ParamKind]:
    """Every family crossed with all four flag combinations."""
    return [ParamKind(f, p, l) for f in Family for p in (False, True) for l in (False, True)]


def dim(kind: ParamKind) -> int:
    return kind.k


def _as_kind(kind) -> ParamKind:
    return ParamKind.parse(kind) if isinstance(kind, str) else kind


# -- generic rotation maps over arrays or jets --------------------------------


def _exp_so3_parts(w, with_v: bool):
    """Rotation (and optionally the SE(3) left Jacobian V) as 3x3 nested lists."""
    t2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    t2v = jet.value(t2)
    small = t2v < SMALL_ANGLE * SMALL_ANGLE
    safe = jet.where(small, np.ones_like(t2v), t2)
    theta = jet.sqrt(safe)
    s = jet.sin(theta)
    half = jet.sin(0.5 * theta)
    a = jet.where(small, 1.0 - t2 / 6.0, s / theta)
    b = jet.where(small, 0.5 - t2 / 24.0, 2.0 * half * half / safe)
    K = [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]

    def assemble(c1, c2):
        M = [[None] * 3 for _ in range(3)]
        for i in range(3):
            for j in range(3):
                e = c2 * (w[i] * w[j])
                if i == j:
                    e = 1.0 + (e - c2 * t2)
                else:
                    e = e + c1 * K[i][j]
                M[i][j] = e
        return M

    R = assemble(a, b)
    if not with_v:
        return R, None
    small_v = t2v < SMALL_ANGLE_V * SMALL_ANGLE_V
    c = jet.where(small_v, 1.0 / 6.0 - t2 / 120.0 + (t2 * t2) / 5040.0, (theta - s) / (theta * safe))
    return R, assemble(b, c)


def _rot6d_parts(a):
    a1, a2 = a[:3], a[3:]
    n1sq = a1[0] * a1[0] + a1[1] * a1[1] + a1[2] * a1[2]
    n1 = jet.sqrt(n1sq)
    b1 = [x / n1 for x in a1]
    p = b1[0] * a2[0] + b1[1] * a2[1] + b1[2] * a2[2]
    u = [a2[i] - p * b1[i] for i in range(3)]
    n2sq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2]
    n2sq_v = jet.value(n2sq)
    a2sq_v = jet.value(a2[0] * a2[0] + a2[1] * a2[1] + a2[2] * a2[2])
    if np.any(jet.value(n1sq) < 1e-24) or np.any(n2sq_v <= 1e-18 * a2sq_v):
        raise DegenerateBasis("6D rotation vectors are zero or parallel")
    n2 = jet.sqrt(n2sq)
    b2 = [x / n2 for x in u]
    b3 = [
        b1[1] * b2[2] - b1[2] * b2[1],
        b1[2] * b2[0] - b1[0] * b2[2],
        b1[0] * b2[1] - b1[1] * b2[0],
    ]
    return [[b1[i], b2[i], b3[i]] for i in range(3)]


# -- batched realization ------------------------------------------------------


class BatchRealizer:
    """Realize cameras ``base_i`` + ``delta_i`` for a batch of bases of one kind.

    The realized state is evaluated as ``base + (raw(delta) - raw(0))`` so
    that a zero residual reproduces the base bitwise; the increment carries
    all of the dependence on ``delta``.
    """

    def __init__(self, kind, bases: Sequence[PinholeCamera]):
        self.kind = _as_kind(kind)
        self.bases = list(bases)
        if not self.bases:
            raise ValueError("at least one base camera is required")
        self.n = len(self.bases)
        self.states0 = np.stack([b.state() for b in self.bases])
        fam = self.kind.family
        if fam in SE3_FAMILIES:
            self._s0 = np.stack([log_se3(b.pose) for b in self.bases])
        elif fam in FOCAL_POSE_FAMILIES:
            self._w0 = np.stack([log_so3(b.pose.rotation) for b in self.bases])
        else:
            self._a0 = np.stack([rotation_to_rot6d(b.pose.rotation) for b in self.bases])
        needs_depth = fam in FOCAL_POSE_FAMILIES or (fam is Family.SCNERF and self.kind.log_scale)
        if needs_depth and np.any(self.states0[:, STATE_T][:, 2] <= 0):
            raise InvalidBase(f"{self.kind.name} needs a positive base translation depth t_z")
        self._raw0, _ = self._raw(np.zeros((self.n, self.kind.k)), jac=False)

    def realize(self, delta: np.ndarray, jac: bool = False):
        """Return states ``(n, 18)`` and, with ``jac``, d(state)/d(delta) ``(n, 18, k)``."""
        delta = np.asarray(delta, dtype=np.float64)
        if delta.ndim == 1:
            delta = delta[None, :]
        if delta.shape != (self.n, self.kind.k):
            raise BadLayout(f"{self.kind.name} expects residuals of shape {(self.n, self.kind.k)}, got {delta.shape}")
        raw, draw = self._raw(delta, jac)
        return self.states0 + (raw - self._raw0), draw

    def cameras(self, states: np.ndarray) -> list[PinholeCamera]:
        return [PinholeCamera.from_state(s, b.width, b.height) for s, b in zip(states, self.bases)]

    def _raw(self, delta: np.ndarray, jac: bool):
        k = self.kind.k
        d = Jet.variables(delta) if jac else [delta[:, j] for j in range(k)]
        fam = self.kind.family
        pix = self.kind.pixel_scale
        log = self.kind.log_scale
        s0 = self.states0
        fx0, fy0, u0, v0, k10, k20 = (s0[:, FX + i] for i in range(6))
        px = fx0 if pix else 1.0

        if fam in SE3_FAMILIES:
            S = [self._s0[:, j] + d[j] for j in range(6)]
            R, V = _exp_so3_parts(S[:3], with_v=True)
            t = [V[i][0] * S[3] + V[i][1] * S[4] + V[i][2] * S[5] for i in range(3)]
            rest = d[6:]
            if fam is Family.SE3:
                focal = (fx0, fy0)
            elif log:
                e = jet.exp(rest[0])
                focal = (fx0 * e, fy0 * e)
            else:
                focal = (fx0 + px * rest[0], fy0 + px * rest[0])
            intr = rest[1:]
        elif fam in FOCAL_POSE_FAMILIES:
            R, _ = _exp_so3_parts([self._w0[:, j] + d[j] for j in range(3)], with_v=False)
            x0, y0, z0 = (s0[:, STATE_T][:, i] for i in range(3))
            ez = jet.exp(d[5])
            z = z0 * ez
            dx = d[3] if pix else d[3] / fx0
            dy = d[4] if pix else d[4] / fx0
            t = [dx * z + x0 * ez, dy * z + y0 * ez, z]
            e = jet.exp(d[6])
            focal = (fx0 * e, fy0 * e)
            intr = d[7:]
        else:
            R = _rot6d_parts([self._a0[:, j] + d[j] for j in range(6)])
            x0, y0, z0 = (s0[:, STATE_T][:, i] for i in range(3))
            z = z0 * jet.exp(d[8]) if log else z0 + d[8]
            t = [x0 + d[6], y0 + d[7], z]
            if log:
                focal = (fx0 * jet.exp(d[9]), fy0 * jet.exp(d[10]))
            else:
                focal = (fx0 + px * d[9], fy0 + px * d[10])
            intr = d[11:]

        if len(intr) >= 2:
            pp = (u0 + px * intr[0], v0 + px * intr[1])
        else:
            pp = (u0, v0)
        dist = (k10 + intr[2], k20 + intr[3]) if len(intr) == 4 else (k10, k20)
        elements = [R[i][j] for i in range(3) for j in range(3)] + list(t) + list(focal) + list(pp) + list(dist)
        assert len(elements) == STATE_SIZE
        return jet.pack(elements, self.n, k if jac else None)


def apply(kind, base: PinholeCamera, delta) -> PinholeCamera:
    """Realize ``base`` shifted by the residual ``delta``."""
    kind = _as_kind(kind)
    delta = np.asarray(delta, dtype=np.float64).ravel()
    if delta.shape != (kind.k,):
        raise BadLayout(f"{kind.name} expects {kind.k} residual entries, got {delta.size}")
    r = BatchRealizer(kind, [base])
    states, _ = r.realize(delta[None, :])
    return r.cameras(states)[0]
