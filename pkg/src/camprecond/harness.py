"""Synthetic ring scenes, camera perturbation protocols, and the reprojection
refinement experiment used to compare preconditioning modes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .camera import STATE_R, STATE_T, FX, FY, PinholeCamera, project
from .config import OptConfig, PerturbSpec, PrecondConfig, ProxyConfig
from .errors import CamPrecondError, InsufficientVisibility, NonFinite, NumericError
from .geometry import look_at, rotation_angle
from .optimizer import AdamState, adam_step, lr_at, shared_intrinsics_loss
from .parameterizations import BatchRealizer, _as_kind, apply
from .preconditioner import Mode, build, covariance
from .sampler import sample_frustum

RING_RADIUS = 4.0
# The unit ball seen from the ring spans about the full image height at this
# focal length, so frustum proxies cover the same image region as the scene.
DESK_FOCAL = 900.0
# World up expressed in camera convention (image y points down).  With a +y
# world up every level camera would have a rotation angle of exactly pi.
WORLD_UP = (0.0, -1.0, 0.0)
MODES = ("none", "diag", "full")


@dataclass(frozen=True)
class Observations:
    indices: np.ndarray  # (n_obs,) indices into SyntheticScene.points
    pixels: np.ndarray  # (n_obs, 2)


@dataclass(frozen=True)
class SyntheticScene:
    gt_cameras: list
    points: np.ndarray
    observations: list
    seed: object

    @property
    def n_cameras(self) -> int:
        return len(self.gt_cameras)


def _ball(rng: np.random.Generator, n: int) -> np.ndarray:
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / 3.0)


def ring_cameras(
    n_cameras: int,
    radius: float = RING_RADIUS,
    width: int = 640,
    height: int = 480,
    focal: float = DESK_FOCAL,
    k1: float = 0.0,
    k2: float = 0.0,
) -> list[PinholeCamera]:
    """Level cameras on a circle around the origin, looking at it.

    Azimuths sit at half-step offsets so that no camera faces exactly along
    the +z axis; rotation angles then stay clear of pi.
    """
    cams = []
    for i in range(n_cameras):
        a = 2.0 * math.pi * (i + 0.5) / n_cameras
        c = np.array([radius * math.sin(a), 0.0, radius * math.cos(a)])
        pose = look_at(c, np.zeros(3), WORLD_UP)
        cams.append(PinholeCamera(focal, focal, width / 2.0, height / 2.0, k1, k2, pose, width, height))
    return cams


def make_scene(
    n_cameras: int = 20,
    n_points: int = 500,
    layout: str = "ring",
    seed=0,
    *,
    radius: float = RING_RADIUS,
    width: int = 640,
    height: int = 480,
    focal: float = DESK_FOCAL,
    k1: float = 0.0,
    k2: float = 0.0,
    min_observations: int | None = None,
) -> SyntheticScene:
    """Ring of cameras looking at points drawn uniformly from the unit ball.

    A camera must observe at least ``min_observations`` points (default 30,
    twice the largest residual dimension).
    """
    if n_cameras < 2:
        raise ValueError("need at least two cameras")
    if n_points < 50:
        raise ValueError("need at least 50 points")
    if layout != "ring":
        raise ValueError(f"unknown layout {layout!r}")
    need = 30 if min_observations is None else min_observations
    rng = np.random.default_rng(seed)
    points = _ball(rng, n_points)
    cams = ring_cameras(n_cameras, radius, width, height, focal, k1, k2)
    observations = []
    for i, cam in enumerate(cams):
        R, t = cam.pose.rotation, cam.pose.translation
        z = points @ R[2] + t[2]
        front = np.flatnonzero(z > 1e-3)
        pix = project(cam, points[front])
        inside = (pix[:, 0] >= 0) & (pix[:, 0] < width) & (pix[:, 1] >= 0) & (pix[:, 1] < height)
        if np.count_nonzero(inside) < need:
            raise InsufficientVisibility(f"camera {i} observes {np.count_nonzero(inside)} points, needs {need}")
        observations.append(Observations(front[inside], pix[inside]))
    return SyntheticScene(cams, points, observations, seed)


def perturb(cameras, spec: PerturbSpec) -> list[PinholeCamera]:
    """Perturb look-at point, position, focal length and dolly distance.

    ``cameras`` may be a scene or a list of cameras.  The look-at target is
    the point on the optical axis at the depth of the world origin.  Draws
    are made per camera in a fixed order from ``default_rng(spec.seed)``.
    """
    cams = getattr(cameras, "gt_cameras", cameras)
    rng = np.random.default_rng(spec.seed)
    out = []
    for cam in cams:
        d_look = rng.normal(0.0, spec.sigma_lookat, 3)
        d_pos = rng.normal(0.0, spec.sigma_position, 3)
        f_scale = math.exp(rng.normal(0.0, spec.sigma_focal_log))
        dolly = math.exp(rng.normal(0.0, spec.sigma_dolly_log))
        pose = cam.pose
        if np.any(d_look) or np.any(d_pos) or dolly != 1.0:
            R = pose.rotation
            c = pose.center()
            target = c + R[2] * pose.translation[2]
            up = -R[1]
            pose = look_at((c + d_pos) * dolly, target + d_look, up)
        k1, k2 = (0.0, 0.0) if spec.zero_distortion else (cam.k1, cam.k2)
        scale = f_scale * dolly
        out.append(PinholeCamera(cam.fx * scale, cam.fy * scale, cam.u0, cam.v0, k1, k2, pose, cam.width, cam.height))
    return out


@dataclass(frozen=True)
class CameraMetrics:
    rotation_err: np.ndarray  # degrees, per camera
    position_err: np.ndarray  # world units, per camera
    focal_err: np.ndarray  # pixels, per camera

    @property
    def rot_err_deg_mean(self) -> float:
        return float(np.mean(self.rotation_err))

    @property
    def pos_err_mean(self) -> float:
        return float(np.mean(self.position_err))

    @property
    def focal_err_px_mean(self) -> float:
        return float(np.mean(self.focal_err))

    def means(self) -> dict:
        return {
            "rot_err_deg_mean": self.rot_err_deg_mean,
            "pos_err_mean": self.pos_err_mean,
            "focal_err_px_mean": self.focal_err_px_mean,
        }


def camera_metrics(gt, est) -> CameraMetrics:
    """Errors of ``est`` against ``gt``; either a camera or a list of cameras."""
    gts = [gt] if isinstance(gt, PinholeCamera) else list(gt)
    ests = [est] if isinstance(est, PinholeCamera) else list(est)
    if len(gts) != len(ests):
        raise ValueError("camera lists differ in length")
    return _state_metrics(np.stack([c.state() for c in gts]), np.stack([c.state() for c in ests]))


def _state_metrics(gt_states: np.ndarray, states: np.ndarray) -> CameraMetrics:
    Rg = gt_states[:, STATE_R].reshape(-1, 3, 3)
    Re = states[:, STATE_R].reshape(-1, 3, 3)
    rel = Rg @ np.transpose(Re, (0, 2, 1))
    rot = np.array([math.degrees(rotation_angle(r)) for r in rel])
    cg = -np.einsum("nji,nj->ni", Rg, gt_states[:, STATE_T])
    ce = -np.einsum("nji,nj->ni", Re, states[:, STATE_T])
    pos = np.linalg.norm(cg - ce, axis=1)
    foc = 0.5 * (np.abs(gt_states[:, FX] - states[:, FX]) + np.abs(gt_states[:, FY] - states[:, FY]))
    return CameraMetrics(rot, pos, foc)


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int
    mse: float
    rot_err_deg_mean: float
    pos_err_mean: float
    focal_err_px_mean: float


@dataclass
class RefineResult:
    kind: str
    mode: str
    seed: object
    trajectory: list[TrajectoryPoint] = field(default_factory=list)
    final_cameras: list = field(default_factory=list)
    final_metrics: CameraMetrics | None = None
    clamp_counts: list[int] = field(default_factory=list)
    failed_step: int | None = None
    error: str | None = None

    @property
    def final(self) -> TrajectoryPoint:
        return self.trajectory[-1]


def _flatten(scene: SyntheticScene):
    pts = [scene.points[o.indices] for o in scene.observations]
    pix = [o.pixels for o in scene.observations]
    offsets = np.zeros(len(pts) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(p) for p in pts])
    return np.concatenate(pts), np.concatenate(pix), offsets


def _preconditioners(kind, cams, mode: str, proxy: ProxyConfig, precond: PrecondConfig, seed, deltas=None):
    """Per-camera ``P_inv`` stack ``(n, k, k)`` and clamp counts."""
    P, clamps = [], []
    for i, cam in enumerate(cams):
        rng_seed = [proxy.seed, *np.atleast_1d(seed).tolist(), i]
        pts = sample_frustum(cam, proxy.m, proxy.near, proxy.far, seed=rng_seed)
        if deltas is not None:
            # Covariance at the current estimate: the realized camera becomes the base.
            cam = apply(kind, cam, deltas[i])
        pc = build(covariance(kind, cam, pts), precond.lam, precond.mu, Mode(mode))
        P.append(pc.p_inv)
        clamps.append(pc.n_clamped)
    return np.stack(P), clamps


def refine(
    scene: SyntheticScene,
    initial,
    kind,
    precond_mode: str = "full",
    opt: OptConfig | None = None,
    seed=0,
    *,
    proxy: ProxyConfig | None = None,
    precond: PrecondConfig | None = None,
    force_identity: bool = False,
) -> RefineResult:
    """Minimize mean reprojection MSE (plus the shared-intrinsics penalty if
    enabled) over per-camera residuals with Adam.

    The optimizer state is a latent ``phi`` per camera; the residual is
    ``P_inv @ phi`` where ``P_inv`` is built once at the initial cameras (or
    every ``precond.recompute_every`` steps).  ``force_identity`` replaces
    every ``P_inv`` by the identity while keeping the wrapped code path.
    """
    kind = _as_kind(kind)
    mode = precond_mode.value if isinstance(precond_mode, Mode) else (precond_mode or "none")
    if mode not in MODES:
        raise ValueError(f"unknown preconditioning mode {precond_mode!r}")
    opt = opt or OptConfig()
    proxy = proxy or ProxyConfig(near=RING_RADIUS - 1.0, far=RING_RADIUS + 1.0)
    precond = precond or PrecondConfig()
    initial = list(initial)
    n, k = len(initial), kind.k
    if n != scene.n_cameras:
        raise ValueError("initial cameras do not match the scene")

    result = RefineResult(kind.name, mode, seed)
    realizer = BatchRealizer(kind, initial)
    gt_states = np.stack([c.state() for c in scene.gt_cameras])
    points, observed, offsets = _flatten(scene)
    total = float(offsets[-1])

    P = None
    if mode != "none":
        if force_identity:
            P = np.broadcast_to(np.eye(k), (n, k, k)).copy()
            result.clamp_counts = [0] * n
        else:
            P, result.clamp_counts = _preconditioners(kind, initial, mode, proxy, precond, seed)

    phi = np.zeros((n, k))
    state = AdamState.zeros(phi.shape, opt.beta1, opt.beta2, opt.eps)
    sched = opt.schedule_for(mode)
    T = opt.steps
    states = good = realizer.states0

    def record(step, sse, states):
        m = _state_metrics(gt_states, states)
        result.trajectory.append(TrajectoryPoint(step, float(np.sum(sse) / total), *m.means().values()))

    step = 0
    try:
        for step in range(T + 1):
            delta = phi if P is None else np.einsum("nij,nj->ni", P, phi)
            states, dstates = realizer.realize(delta, jac=True)
            if not np.all(np.isfinite(states)) or np.any(states[:, FX:FY + 1] <= 0):
                raise NonFinite("realized camera has non-finite entries or non-positive focal length")
            sse, g = _kernels.residual_gradient(states, dstates, points, offsets, observed)
            good = states
            if step % opt.log_every == 0 or step == T:
                record(step, sse, states)
            if step == T:
                break
            grad = (2.0 / total) * g
            if opt.shared:
                _, gi = shared_intrinsics_loss(states[:, FX:], opt.shared_weights)
                grad = grad + np.einsum("ns,nsk->nk", gi, dstates[:, FX:, :])
            if P is not None:
                grad = np.einsum("nji,nj->ni", P, grad)
            phi = adam_step(phi, grad, state, lr_at(sched, step, T))
            r = precond.recompute_every
            if P is not None and not force_identity and r > 0 and (step + 1) % r == 0 and step + 1 < T:
                cur = np.einsum("nij,nj->ni", P, phi)
                P, _ = _preconditioners(kind, initial, mode, proxy, precond, seed, deltas=cur)
                # Keep the realized residual fixed across the change of variables.
                phi = np.linalg.solve(P, cur[..., None])[..., 0]
    except (NumericError, CamPrecondError) as e:
        result.failed_step = step
        result.error = f"{type(e).__name__}: {e}"
        if not result.trajectory or result.trajectory[-1].step != step:
            m = _state_metrics(gt_states, good)
            result.trajectory.append(TrajectoryPoint(step, math.nan, *m.means().values()))
    result.final_cameras = realizer.cameras(good)
    result.final_metrics = _state_metrics(gt_states, good)
    return result


def initial_mse(scene: SyntheticScene, cameras) -> float:
    """Mean squared reprojection error of ``cameras`` on the scene observations."""
    sq = 0.0
    count = 0
    for cam, obs in zip(cameras, scene.observations):
        r = project(cam, scene.points[obs.indices]) - obs.pixels
        sq += float(np.sum(r * r))
        count += len(obs.indices)
    return sq / count


__all__ = [
    "CameraMetrics",
    "Observations",
    "RefineResult",
    "SyntheticScene",
    "TrajectoryPoint",
    "camera_metrics",
    "initial_mse",
    "make_scene",
    "perturb",
    "refine",
    "ring_cameras",
]
