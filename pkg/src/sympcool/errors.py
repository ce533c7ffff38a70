"""Exception and warning types shared across the package."""

from __future__ import annotations


class SympcoolError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SympcoolError):
    """An input is outside the physical or numerical domain of an operation."""


class AntiTrapped(DomainError):
    """The Zeeman state is high-field seeking: (-1)^F * mF <= 0, no trap."""


class RadialUnconfined(DomainError):
    """Radial curvature G^2/B0 - C is not positive, the trap does not close."""


class NoInteriorPeak(DomainError):
    """The buffer phase-space density has no interior maximum (3*alpha <= 1)."""


class StepFailure(SympcoolError):
    """The adaptive integrator could not meet its tolerance."""


class InsufficientDecay(SympcoolError):
    """A relaxation series spans less than two e-folds, no reliable fit."""


class ConfigError(SympcoolError):
    """A run configuration failed validation.

    ``line`` carries a 1-based line number in the offending JSON file when
    one could be determined, so the CLI can anchor its message.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class CellUnderflowWarning(UserWarning):
    """Most collision cells are persistently underpopulated."""
