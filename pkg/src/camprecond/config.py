"""Run configuration: typed sections, JSON loading, dot-path overrides.

Every section is a frozen dataclass; JSON keys map one-to-one onto fields
(``precond.lambda`` is the one rename, to ``lam``).  Unknown keys raise
:class:`~.errors.ConfigError`, as do values that violate a module
precondition, before any computation starts.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .optimizer import Schedule, SharedWeights
from .parameterizations import ParamKind

PERTURB_PRESETS = {
    # Perturbed-360 constants.
    "p360": dict(sigma_lookat=0.005, sigma_position=0.005, sigma_focal_log=math.log(1.02),
                 sigma_dolly_log=math.log(1.05), zero_distortion=True),
    # Perturbed-Synthetic constants.
    "psynth": dict(sigma_lookat=0.1, sigma_position=0.1, sigma_focal_log=math.log(1.2),
                   sigma_dolly_log=math.log(1.1), zero_distortion=True),
    # Perturbed-Synthetic recipe scaled to the desk ring scene.
    "psynth_scaled": dict(sigma_lookat=0.05, sigma_position=0.05, sigma_focal_log=math.log(1.05),
                          sigma_dolly_log=math.log(1.05), zero_distortion=True),
    "none": dict(sigma_lookat=0.0, sigma_position=0.0, sigma_focal_log=0.0, sigma_dolly_log=0.0,
                 zero_distortion=False),
}
PERTURB_PRESETS["desk"] = PERTURB_PRESETS["psynth_scaled"]


@dataclass(frozen=True)
class SceneConfig:
    n_cameras: int = 20
    n_points: int = 500
    layout: str = "ring"
    seed: int = 0
    radius: float = 4.0
    width: int = 640
    height: int = 480
    focal: float = 900.0
    k1: float = 0.0
    k2: float = 0.0

    def validate(self):
        _require(self.n_cameras >= 2, "scene.n_cameras must be >= 2")
        _require(self.n_points >= 50, "scene.n_points must be >= 50")
        _require(self.layout == "ring", "scene.layout must be 'ring'")
        _require(self.radius > 1.0, "scene.radius must exceed the unit point ball")
        _require(self.width > 0 and self.height > 0 and self.focal > 0, "scene image size and focal must be positive")


@dataclass(frozen=True)
class PerturbSpec:
    sigma_lookat: float = 0.05
    sigma_position: float = 0.05
    sigma_focal_log: float = math.log(1.05)
    sigma_dolly_log: float = math.log(1.05)
    zero_distortion: bool = True
    seed: int = 0

    @classmethod
    def preset(cls, name: str, seed: int = 0) -> "PerturbSpec":
        try:
            return cls(**PERTURB_PRESETS[name], seed=seed)
        except KeyError:
            raise ConfigError(f"unknown perturbation preset {name!r}") from None

    def validate(self):
        for f in ("sigma_lookat", "sigma_position", "sigma_focal_log", "sigma_dolly_log"):
            _require(getattr(self, f) >= 0, f"perturb.{f} must be >= 0")


@dataclass(frozen=True)
class ProxyConfig:
    m: int = 1000
    near: float = 0.2
    far: float = 100.0
    seed: int = 0

    def validate(self):
        _require(self.m >= 1, "proxy.m must be positive")
        _require(0 < self.near < self.far, "proxy needs 0 < near < far")


@dataclass(frozen=True)
class PrecondConfig:
    lam: float = 1e-1
    mu: float = 1e-8
    recompute_every: int = 0

    def validate(self):
        _require(self.lam >= 0 and self.mu >= 0, "precond.lambda and precond.mu must be >= 0")
        _require(self.recompute_every >= 0, "precond.recompute_every must be >= 0")


@dataclass(frozen=True)
class OptConfig:
    lr_start: float = 1.0
    lr_end: float = 0.1
    warmup_steps: int = 100
    warmup_floor: float = 1e-8
    # Multiplies both learning rates for the diag and full arms, whose latent
    # variables are measured in sqrt(m)-scaled pixels rather than raw units.
    precond_lr_scale: float = 1000.0
    steps: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    shared: bool = False
    shared_weights: SharedWeights = field(default_factory=SharedWeights)
    log_every: int = 100

    @property
    def schedule(self) -> Schedule:
        return Schedule(self.lr_start, self.lr_end, self.warmup_steps, self.warmup_floor)

    def schedule_for(self, mode: str) -> Schedule:
        s = 1.0 if mode == "none" else self.precond_lr_scale
        return Schedule(self.lr_start * s, self.lr_end * s, self.warmup_steps, self.warmup_floor)

    def validate(self):
        _require(self.lr_start > 0 and self.lr_end > 0, "opt learning rates must be positive")
        _require(self.precond_lr_scale > 0, "opt.precond_lr_scale must be positive")
        _require(self.warmup_steps >= 0, "opt.warmup_steps must be >= 0")
        _require(self.steps >= 1, "opt.steps must be >= 1")
        _require(0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, "opt betas must lie in [0, 1)")
        _require(self.eps > 0, "opt.eps must be positive")
        _require(self.log_every >= 1, "opt.log_every must be >= 1")
        w = self.shared_weights
        _require(min(w.focal, w.principal, w.distortion) >= 0, "opt.shared_weights must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    id: str = "desk"
    kinds: tuple = ("focal_pose_intrinsics",)
    modes: tuple = ("none", "diag", "full")
    seeds: tuple = tuple(range(10))

    def validate(self):
        for k in self.kinds:
            try:
                ParamKind.parse(k)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        _require(all(m in ("none", "diag", "full") for m in self.modes), "experiment.modes must be none|diag|full")
        _require(len(self.seeds) > 0, "experiment.seeds must be non-empty")


@dataclass(frozen=True)
class CameraConfig:
    kind: str = "se3_focal_intrinsics"
    fx: float = 600.0
    fy: float = 600.0
    u0: float = 320.0
    v0: float = 240.0
    k1: float = 0.0
    k2: float = 0.0
    width: int = 640
    height: int = 480
    position: tuple = (0.0, 0.0, -4.0)
    look_at: tuple = (0.0, 0.0, 0.0)

    def validate(self):
        try:
            ParamKind.parse(self.kind)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        _require(self.fx > 0 and self.fy > 0 and self.width > 0 and self.height > 0, "camera intrinsics invalid")
        _require(len(self.position) == 3 and len(self.look_at) == 3, "camera.position/look_at must be 3-vectors")


@dataclass(frozen=True)
class RunConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    perturb: PerturbSpec = field(default_factory=PerturbSpec)
    proxy: ProxyConfig = field(default_factory=lambda: ProxyConfig(near=3.0, far=5.0))
    precond: PrecondConfig = field(default_factory=PrecondConfig)
    opt: OptConfig = field(default_factory=OptConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    trails_kinds: tuple = ("se3", "se3_focal", "se3_focal_intrinsics", "focal_pose_intrinsics", "scnerf")

    def validate(self) -> "RunConfig":
        for section in (self.scene, self.perturb, self.proxy, self.precond, self.opt, self.experiment, self.camera):
            section.validate()
        for k in self.trails_kinds:
            try:
                ParamKind.parse(k)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        return self

    def to_json(self) -> dict:
        d = asdict(self)
        d["precond"]["lambda"] = d["precond"].pop("lam")
        d["perturb"].pop("preset", None)
        return d


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


_SECTIONS = {
    "scene": SceneConfig,
    "perturb": PerturbSpec,
    "proxy": ProxyConfig,
    "precond": PrecondConfig,
    "opt": OptConfig,
    "experiment": ExperimentConfig,
    "camera": CameraConfig,
}
_RENAMES = {("precond", "lambda"): "lam"}


def _coerce(value, default, where: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list")
        return tuple(value)
    return value


def _build_section(name: str, raw: dict):
    cls = _SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be an object")
    raw = dict(raw)
    base = cls()
    if name == "proxy":
        base = RunConfig().proxy
    if name == "perturb" and "preset" in raw:
        preset = raw.pop("preset")
        if not isinstance(preset, str):
            raise ConfigError("perturb.preset must be a string")
        base = PerturbSpec.preset(preset)
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        attr = _RENAMES.get((name, key), key)
        if attr not in known:
            raise ConfigError(f"unknown config key {name}.{key}")
        default = getattr(base, attr)
        if attr == "shared_weights":
            if not isinstance(value, dict):
                raise ConfigError("opt.shared_weights must be an object")
            unknown = set(value) - {"focal", "principal", "distortion"}
            if unknown:
                raise ConfigError(f"unknown config key opt.shared_weights.{sorted(unknown)[0]}")
            value = replace(default, **{k: _coerce(v, 0.0, f"opt.shared_weights.{k}") for k, v in value.items()})
        else:
            value = _coerce(value, default, f"{name}.{key}")
        kwargs[attr] = value
    return replace(base, **kwargs)


def from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            kwargs[key] = _build_section(key, value)
        elif key == "trails_kinds":
            kwargs[key] = _coerce(value, (), key)
        else:
            raise ConfigError(f"unknown config section {key!r}")
    return RunConfig(**kwargs).validate()


def load(path: str | Path | None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Load a JSON config (``None`` means defaults) and apply dot-path overrides."""
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
    raw = copy.deepcopy(raw)
    for dotted, text in (overrides or {}).items():
        parts = dotted.split(".")
        if len(parts) < 2:
            raise ConfigError(f"override {dotted!r} must be section.key")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = raw
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r} descends into a non-object")
        node[parts[-1]] = value
    return from_dict(raw)
