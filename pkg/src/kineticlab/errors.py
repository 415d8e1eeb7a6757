"""Exception types shared across the package.

Grouped by how the CLI maps them to exit codes: configuration errors
(exit 1), numerical aborts (exit 2), and I/O failures (exit 3).
"""

from __future__ import annotations


class ConfigError(Exception):
    """Base for configuration problems (CLI exit code 1)."""


class ParseError(ConfigError):
    """Malformed config file. Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ConfigError):
    """Config parsed but violates an invariant (names the invariant)."""


class NumericalAbort(Exception):
    """Base for runtime numerical failures (CLI exit code 2)."""


class NegativeDensity(NumericalAbort):
    """Distribution developed values below the -1e-12 clip floor."""

    def __init__(self, message: str, min_value: float, time: float):
        self.min_value = min_value
        self.time = time
        super().__init__(message)


class NoConvergence(NumericalAbort):
    """Fixed-point iteration hit max_iter. Carries the increment history."""

    def __init__(self, message: str, increments: list[float]):
        self.increments = list(increments)
        super().__init__(message)


class DomainExit(NumericalAbort):
    """A characteristic endpoint left the spatial grid."""


class NotBlownUp(Exception):
    """Blow-up estimate requested before any marker crossing."""


class ZeroWeight(ConfigError):
    """Interaction kernel integrates to zero; coupling is undefined."""


class GridMismatch(Exception):
    """Two fields that must share a grid do not."""


class SupportClipped(Exception):
    """A remap pushed non-negligible mass off the grid."""

    def __init__(self, message: str, clipped_mass: float):
        self.clipped_mass = clipped_mass
        super().__init__(message)


class IOContractError(Exception):
    """Missing or malformed artifact on disk (CLI exit code 3)."""
