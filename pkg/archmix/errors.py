"""
Exception hierarchy for archmix.

Every error raised on purpose by the library derives from ArchMixError so the
CLI can map it to an exit code without catching unrelated failures.
"""

from typing import Optional


class ArchMixError(Exception):
    """Base class for all archmix errors."""


class SpecValidationError(ArchMixError, ValueError):
    """An input field is invalid. Carries the offending field name."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class AssumptionViolatedError(ArchMixError):
    """A model assumption required by the requested computation does not hold."""


class SimulationDivergedError(ArchMixError):
    """A simulated value left the representable range."""

    def __init__(self, t: int, replicate: int):
        self.t = t
        self.replicate = replicate
        super().__init__(f"simulation diverged at t={t} in replicate {replicate}")


class TruncationError(ArchMixError):
    """A truncated infinite sum cannot be certified at the requested tolerance."""

    def __init__(self, message: str, required: Optional[dict] = None):
        self.required = required or {}
        super().__init__(message)


class DivergenceError(ArchMixError):
    """The inverse power series does not converge (coefficient sum >= 1)."""


class QuadratureError(ArchMixError):
    """Adaptive quadrature failed to converge."""

    def __init__(self, message: str, at: object = None):
        self.at = at
        super().__init__(message)


class InternalConsistencyError(ArchMixError):
    """Two independent computation routes disagree beyond tolerance."""


class CombinatorialLimitError(ArchMixError):
    """An exponential-cost oracle was requested beyond its size limit."""


class EnumerationLimitError(ArchMixError):
    """A cell table is too fine for exact enumeration."""


class ContractError(ArchMixError):
    """A user-supplied function violates its monotonicity contract."""
