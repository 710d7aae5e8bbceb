"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes (see cli.py): configuration
and argument problems exit 2, solver or calibration breakdowns exit 3,
and sequence-guard violations exit 4.
"""

from __future__ import annotations


class EvsimError(Exception):
    """Base class for all domain errors raised by this package."""


class ConfigError(EvsimError):
    """A configuration document violates the schema or a type invariant."""


class GeometryError(EvsimError):
    """A geometric precondition failed (wrap radius, reel packing, ...)."""


class SolverError(EvsimError):
    """The equilibrium iteration failed to converge or diverged."""

    def __init__(self, message: str, residual: float | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class CalibrationError(EvsimError):
    """No parameter set came close enough to any calibration target."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class SequenceError(EvsimError):
    """An action violated an operation-sequence guard."""

    def __init__(self, message: str, step_index: int | None = None,
                 guard: str | None = None, report=None):
        super().__init__(message)
        self.step_index = step_index
        self.guard = guard
        self.report = report  # optional payload, e.g. a BucklingReport
