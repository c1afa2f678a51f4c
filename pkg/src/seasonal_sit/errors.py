"""Exception hierarchy shared by every layer of the package."""

from __future__ import annotations


class SeasonalSITError(Exception):
    """Base class for all errors raised by this package."""


class ModelError(SeasonalSITError, ValueError):
    """Invalid coefficient, schedule, or model definition."""


class IntegrationError(SeasonalSITError):
    """Base class for integrator failures."""


class BackwardBlowup(IntegrationError):
    """Backward integration escaped the blowup guard or the step size underflowed.

    ``t_star`` is the last time reached before the guard fired.
    """

    def __init__(self, t_star: float, message: str | None = None):
        self.t_star = t_star
        super().__init__(message or f"backward solution blew up near t={t_star:.6g}")


class ToleranceFailure(IntegrationError):
    """Persistent step rejection or a solution that went negative beyond atol."""


class OutOfRange(SeasonalSITError):
    """The requested value is not in the range of the Poincare map."""


class NotConverged(SeasonalSITError):
    def __init__(self, last_iterate: float, periods: int):
        self.last_iterate = last_iterate
        self.periods = periods
        super().__init__(
            f"orbit did not converge within {periods} periods (last iterate {last_iterate:.10g})"
        )


class SuspectCount(SeasonalSITError):
    """More than three fixed points were found; always a numerical artefact."""


class Inconsistent(SeasonalSITError):
    """Numerically found fixed-point structure contradicts the theoretical regime."""


class UnsupportedVariant(SeasonalSITError):
    """Operation is only defined for a subset of model variants."""


class ConfigError(SeasonalSITError, ValueError):
    """Malformed or invalid run configuration."""
