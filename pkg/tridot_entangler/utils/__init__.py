from __future__ import annotations

from . import args, const
from . import exception as exc
from .helpers import (
    CheckResult,
    CsvOutput,
    fmt_str,
    format_report,
    to_display_rate,
    to_display_time,
)

__all__ = [
    "CheckResult",
    "CsvOutput",
    "args",
    "const",
    "exc",
    "fmt_str",
    "format_report",
    "to_display_rate",
    "to_display_time",
]
