"""Exception hierarchy shared by every module."""


class CamPrecondError(Exception):
    """Base class for all errors raised by this package."""


class NumericError(CamPrecondError):
    """A numeric failure: degenerate geometry, non-finite values, bad matrices."""


class AngleNearPi(NumericError):
    pass


class DegenerateBasis(NumericError):
    pass


class BehindCamera(NumericError):
    pass


class UndistortDiverged(NumericError):
    pass


class NonFinite(NumericError):
    pass


class NonFiniteGradient(NumericError):
    pass


class NotPositiveDefinite(NumericError):
    pass


class EmptyPointSet(NumericError):
    pass


class InsufficientVisibility(NumericError):
    pass


class BadLayout(CamPrecondError, ValueError):
    pass


class DimensionMismatch(CamPrecondError, ValueError):
    pass


class InvalidBase(CamPrecondError, ValueError):
    """The base camera violates a parameterization precondition (e.g. t_z <= 0)."""


class ConfigError(CamPrecondError, ValueError):
    pass
