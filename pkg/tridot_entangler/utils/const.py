"""Constants for the three-dot entangler simulator."""

from __future__ import annotations

from enum import IntEnum, StrEnum
from os import getenv
from typing import Final

HBAR_UEV_NS: Final[float] = 0.6582119569
"""Reduced Planck constant in μeV·ns, used only for display conversion."""

DIM: Final[int] = 12

DEFAULT_MARGIN_THRESHOLD: Final[float] = 10.0

DEFAULT_WORKERS: Final[int] = int(getenv("TRIDOT_WORKERS", "1"))

# Euler-mode guard on dt * max(rate, ||H||)
EULER_STEP_GUARD: Final[float] = 0.05
EULER_DT_OVER_GAMMA_B: Final[float] = 0.002

HERMITIAN_ATOL: Final[float] = 1e-10
TRACE_ATOL: Final[float] = 1e-10
POSITIVITY_ATOL: Final[float] = 1e-8
NULLSPACE_RTOL: Final[float] = 1e-9
INTEGRATION_RTOL: Final[float] = 1e-4
PROBABILITY_SLACK: Final[float] = 1e-9

# τ* is where dR/dτ first falls below this fraction of its maximum
TAU_STAR_FRACTION: Final[float] = 0.1


class Lead(StrEnum):
    """Output leads that are monitored for emission events."""

    A = "A"
    B = "B"


class EventKind(StrEnum):
    """Kind of a recorded trajectory event."""

    EMIT = "emit"
    FILL = "fill"


class HamiltonianChoice(StrEnum):
    """Which coherent generator drives the dynamics."""

    FULL = "full"
    EFFECTIVE = "effective"


class SuperoperatorKind(StrEnum):
    """Tag for the two Liouvillian flavours."""

    FULL = "full"
    NO_JUMP_AB = "no_jump_ab"


class TrajectoryMethod(StrEnum):
    """Unravelling used to generate quantum-jump trajectories."""

    EULER = "euler"
    WAITING_TIME = "waiting_time"


class Units(StrEnum):
    """Display unit systems for CLI output."""

    NATURAL = "natural"
    UEV = "ueV"


class ExitCode(IntEnum):
    """Process exit codes of the `tridot` command."""

    OK = 0
    INVARIANT_FAILURE = 1
    CONFIG_ERROR = 2
    NUMERICAL_FAILURE = 3


__all__ = [
    "DEFAULT_MARGIN_THRESHOLD",
    "DEFAULT_WORKERS",
    "DIM",
    "HBAR_UEV_NS",
    "EventKind",
    "ExitCode",
    "HamiltonianChoice",
    "Lead",
    "SuperoperatorKind",
    "TrajectoryMethod",
    "Units",
]
