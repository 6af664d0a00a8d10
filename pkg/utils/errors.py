"""
utils/errors.py

Exception hierarchy for the subharmonic analysis toolkit.

Every error carries the equation tag of the computation that raised it so the
command line can print diagnostics such as ``error[eq8]: ...``.
"""

from typing import Optional


class SubharmonicAnalysisError(Exception):
    """Base class for all analysis failures."""

    def __init__(self, message: str, equation_id: str = "n/a"):
        super().__init__(message)
        self.equation_id = equation_id

    def __str__(self) -> str:
        return f"{self.args[0]}"


class ModelError(SubharmonicAnalysisError, ValueError):
    """Unknown scheme, missing or non-positive parameter, or dimension mismatch."""


class SingularMatrixError(SubharmonicAnalysisError):
    """A matrix that has to be inverted is singular after regularization."""


class DutySaturationError(SubharmonicAnalysisError):
    """The compensator output never crosses the ramp inside the clock period."""

    def __init__(self, message: str, saturation: int, equation_id: str = "duty"):
        super().__init__(message, equation_id)
        # 0: switch never turns on, 1: switch never turns off
        self.saturation = saturation


class NonTransversalError(SubharmonicAnalysisError):
    """The orbit grazes the ramp, so the sampled-data Jacobian is undefined."""


class DutyResidualError(SubharmonicAnalysisError):
    """The polished switching instant leaves y0(d) - h(d) above tolerance."""


class NoBracketError(SubharmonicAnalysisError):
    """Both ends of a bisection range classify the same way."""


class InsufficientCyclesError(SubharmonicAnalysisError, ValueError):
    """Too few settled cycles for period detection."""


class ConfigError(SubharmonicAnalysisError, ValueError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message, equation_id="config")
        self.field = field

    def __str__(self) -> str:
        if self.field:
            return f"{self.field}: {self.args[0]}"
        return f"{self.args[0]}"
