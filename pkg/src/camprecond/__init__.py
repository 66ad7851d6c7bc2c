"""Camera preconditioning for reprojection-driven camera refinement."""

from .camera import PinholeCamera, project, unproject
from .geometry import RigidTransform, exp_se3, exp_so3, log_se3, log_so3, look_at
from .parameterizations import ParamKind, apply, dim

__all__ = [
    "PinholeCamera",
    "ParamKind",
    "RigidTransform",
    "apply",
    "dim",
    "exp_se3",
    "exp_so3",
    "log_se3",
    "log_so3",
    "look_at",
    "project",
    "unproject",
]

__version__ = "0.1.0"
