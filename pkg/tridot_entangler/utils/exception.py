"""Exceptions for the tridot_entangler package."""

from __future__ import annotations

from typing import TYPE_CHECKING, ClassVar

from . import const

if TYPE_CHECKING:
    from pathlib import Path


class EntanglerError(Exception):
    """Base class for all errors raised by the simulator."""

    EXIT_CODE: ClassVar[const.ExitCode] = const.ExitCode.NUMERICAL_FAILURE


class ConfigurationError(EntanglerError):
    """Raised when inputs or configuration are invalid."""

    EXIT_CODE: ClassVar[const.ExitCode] = const.ExitCode.CONFIG_ERROR


class ConfigFileError(ConfigurationError):
    """Raised when a config file cannot be read or validated."""

    def __init__(self, file: Path, message: str) -> None:
        """Initialize the error."""
        super().__init__(f"Invalid config file {file.as_posix()}: {message}")
        self.file = file


class InvalidGridError(ConfigurationError):
    """Raised when a grid is empty or not monotone increasing."""

    def __init__(self, name: str, message: str) -> None:
        """Initialize the error."""
        super().__init__(f"Grid `{name}` is invalid: {message}")


class StepSizeGuardError(ConfigurationError):
    """Raised when the Euler step is too coarse for the fastest scale."""

    def __init__(self, dt: float, scale: float, limit: float) -> None:
        """Initialize the error."""
        super().__init__(
            f"dt={dt:g} times fastest scale {scale:g} is {dt * scale:g}, "
            f"above the allowed {limit:g}",
        )
        self.dt = dt
        self.scale = scale


class InvalidOccupationError(ConfigurationError):
    """Raised when a charge occupation is out of range."""

    def __init__(self, n_a: int, n_b: int, n_c: int) -> None:
        """Initialize the error."""
        super().__init__(
            f"Occupation (n_a={n_a}, n_b={n_b}, n_c={n_c}) outside "
            "n_a, n_b in {0, 1}, n_c in {0, 1, 2}",
        )


class UnsortedStreamError(ConfigurationError):
    """Raised when an event stream is not time-ordered."""

    def __init__(self, index: int) -> None:
        """Initialize the error."""
        super().__init__(f"Event stream not time-sorted at event index {index}")


class NegativeDurationError(ConfigurationError):
    """Raised when a propagation time is negative."""

    def __init__(self, t: float) -> None:
        """Initialize the error."""
        super().__init__(f"Propagation time must be non-negative, got t={t:g}")
        self.t = t


class NumericalError(EntanglerError):
    """Raised when a numerical procedure fails or is undefined."""


class UndefinedMarginError(NumericalError):
    """Raised when suppression margins are requested with g = 0."""

    def __init__(self) -> None:
        """Initialize the error."""
        super().__init__(
            "Suppression margins are undefined for g = 0; the device does not transport",
        )


class NonFiniteInputError(NumericalError):
    """Raised when a solver receives NaN or infinite input."""

    def __init__(self, name: str) -> None:
        """Initialize the error."""
        super().__init__(f"Non-finite values in `{name}`")


class SteadyStateError(NumericalError):
    """Raised when no unique transporting steady state exists."""


class DegenerateSteadyStateError(SteadyStateError):
    """Raised when the Liouvillian nullspace has more than one dimension."""

    def __init__(self, dimension: int) -> None:
        """Initialize the error."""
        super().__init__(f"Stationary subspace is degenerate (dimension {dimension})")
        self.dimension = dimension


class NoTransportError(SteadyStateError):
    """Raised when the unique stationary state carries no current."""

    def __init__(self, current: float, dimension: int = 1) -> None:
        """Initialize the error."""
        super().__init__(
            f"Stationary subspace of dimension {dimension} carries no current "
            f"(output current {current:.3e})",
        )
        self.dimension = dimension
        self.current = current


class ZeroCurrentError(NumericalError):
    """Raised when a correlation denominator vanishes."""

    def __init__(self, lead: const.Lead) -> None:
        """Initialize the error."""
        super().__init__(f"No steady current on lead {lead}; correlation undefined")
        self.lead = lead


class IntegrationError(NumericalError):
    """Raised when kernel integration cannot be carried out."""


class ConsistencyError(NumericalError):
    """Raised when a computed probability leaves its allowed range."""

    def __init__(self, name: str, value: float) -> None:
        """Initialize the error."""
        super().__init__(f"{name} = {value!r} outside [0, 1]")


class InvariantViolationError(NumericalError):
    """Raised when a computed curve breaks a sign or ordering invariant."""

    def __init__(self, name: str, invariant: str, worst: float) -> None:
        """Initialize the error."""
        super().__init__(f"`{name}` is not {invariant}: worst violation {worst:.3e}")
        self.name = name
        self.worst = worst


__all__ = [
    "ConfigFileError",
    "ConfigurationError",
    "ConsistencyError",
    "DegenerateSteadyStateError",
    "EntanglerError",
    "IntegrationError",
    "InvalidGridError",
    "InvalidOccupationError",
    "InvariantViolationError",
    "NegativeDurationError",
    "NoTransportError",
    "NonFiniteInputError",
    "NumericalError",
    "StepSizeGuardError",
    "SteadyStateError",
    "UndefinedMarginError",
    "UnsortedStreamError",
    "ZeroCurrentError",
]
