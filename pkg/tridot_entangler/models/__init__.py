from __future__ import annotations

from .config import RunConfig, TrajectoryConfig
from .params import (
    SuppressionMargins,
    SystemParams,
    make_operating_point,
    resonance_detunings,
    suppression_margins,
)

__all__ = [
    "RunConfig",
    "SuppressionMargins",
    "SystemParams",
    "TrajectoryConfig",
    "make_operating_point",
    "resonance_detunings",
    "suppression_margins",
]
