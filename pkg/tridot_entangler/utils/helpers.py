"""Helper functions for output formatting and file writing."""

from __future__ import annotations

import csv
import sys
from logging import getLogger
from os import replace
from tempfile import NamedTemporaryFile
from typing import TYPE_CHECKING, Any, Literal, NamedTuple, Self, TextIO

from . import const

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence
    from pathlib import Path
    from types import TracebackType

LOGGER = getLogger(__name__)

_CODES = {
    "bold": "\033[1m",
    "italic": "\033[3m",
    "red": "\033[31m",
    "green": "\033[32m",
    "amber": "\033[33m",
    "blue": "\033[34m",
    "cyan": "\033[36m",
    "reset": "\033[0m",
}


def fmt_str(
    v: Any,
    /,
    *fmt_opts: Literal["bold", "italic", "red", "green", "amber", "blue", "cyan"],
) -> str:
    """Wrap a value in ANSI codes."""
    s = str(v)

    for fmt_opt in fmt_opts:
        s = f"{_CODES[fmt_opt]}{s!s}"

    if s.endswith(_CODES["reset"]):
        return s

    return f"{s}{_CODES['reset']}"


class CheckResult(NamedTuple):
    """Outcome of one invariant check of `tridot validate`."""

    name: str
    passed: bool
    detail: str = ""


def format_report(results: Sequence[CheckResult]) -> str:
    """Format validation results as one aligned line per check plus a summary."""
    if not results:
        return "\nNo checks were run\n"

    name_pad = max(len(r.name) for r in results) + 1
    lines = []

    for result in results:
        status = fmt_str("PASS", "green", "bold") if result.passed else fmt_str("FAIL", "red", "bold")
        lines.append(
            f"{fmt_str(f'{result.name:<{name_pad}}', 'bold', 'blue')} {status} {result.detail}",
        )

    failed = sum(not r.passed for r in results)
    summary = fmt_str(
        " ".join(
            (
                "Ran",
                fmt_str(len(results), "bold"),
                "checks,",
                fmt_str(failed, "red" if failed else "green"),
                "failed",
            ),
        ),
        "bold",
    )

    return "\n" + "\n".join(lines) + f"\n\n{summary}\n"


def _fmt_cell(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)

    return str(value)


class CsvOutput:
    """A context manager that writes CSV rows once, atomically, on a clean exit.

    With no path the rows go to stdout. Files are written to a sibling temporary
    file and moved into place, so an aborted run never leaves a partial output.
    """

    _rows: list[tuple[Any, ...]]

    def __init__(self, path: Path | None, header: Sequence[str]) -> None:
        """Remember the destination and header."""
        self.path = path
        self.header = tuple(header)

    def __enter__(self) -> Self:
        """Start collecting rows."""
        self._rows = []
        return self

    def writerow(self, row: Sequence[Any]) -> None:
        """Queue a row; floats are written with their shortest round-trip repr."""
        if len(row) != len(self.header):
            raise ValueError(row)

        self._rows.append(tuple(row))

    def writerows(self, rows: Iterable[Sequence[Any]]) -> None:
        """Queue several rows."""
        for row in rows:
            self.writerow(row)

    def _dump(self, fout: TextIO) -> None:
        writer = csv.writer(fout, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows([_fmt_cell(v) for v in row] for row in self._rows)

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_value: BaseException | None,
        traceback: TracebackType | None,
    ) -> None:
        """Write everything, unless the block raised."""
        if exc_type is not None:
            return

        if self.path is None:
            self._dump(sys.stdout)
            return

        self.path.parent.mkdir(parents=True, exist_ok=True)
        with NamedTemporaryFile(
            "w",
            dir=self.path.parent,
            prefix=f".{self.path.name}.",
            delete=False,
            newline="",
            encoding="utf-8",
        ) as fout:
            self._dump(fout)

        replace(fout.name, self.path)
        LOGGER.info("Wrote %i rows to %s", len(self._rows), self.path)


def to_display_time(t: float, units: const.Units) -> float:
    """Convert an internal time (ħ = 1, energies in μeV) to the display unit."""
    if units == const.Units.UEV:
        return t * const.HBAR_UEV_NS

    return t


def to_display_rate(rate: float, units: const.Units) -> float:
    """Convert an internal rate to the display unit (per ns in μeV mode)."""
    if units == const.Units.UEV:
        return rate / const.HBAR_UEV_NS

    return rate


__all__ = [
    "CheckResult",
    "CsvOutput",
    "fmt_str",
    "format_report",
    "to_display_rate",
    "to_display_time",
]
