"""Unit tests for output helpers."""

from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from tridot_entangler.utils import (
    CheckResult,
    CsvOutput,
    const,
    format_report,
    to_display_rate,
    to_display_time,
)

if TYPE_CHECKING:
    from pathlib import Path


def test_csv_output_writes_on_clean_exit(tmp_path: Path) -> None:
    """Floats keep full precision and the header comes first."""
    path = tmp_path / "out" / "rows.csv"

    with CsvOutput(path, ("t", "lead")) as fout:
        fout.writerow((0.1 + 0.2, "A"))

    assert path.read_text() == "t,lead\n0.30000000000000004,A\n"


def test_csv_output_leaves_nothing_on_error(tmp_path: Path) -> None:
    """A failed block never creates the file."""
    path = tmp_path / "rows.csv"

    with pytest.raises(RuntimeError), CsvOutput(path, ("t",)) as fout:
        fout.writerow((1.0,))
        raise RuntimeError

    assert not path.exists()
    assert list(tmp_path.iterdir()) == []


def test_csv_output_checks_row_width(tmp_path: Path) -> None:
    """Rows must match the header."""
    with CsvOutput(tmp_path / "rows.csv", ("a", "b")) as fout, pytest.raises(ValueError):
        fout.writerow((1,))


def test_format_report_counts_failures() -> None:
    """Every check gets a line and failures are counted in the summary."""
    report = format_report(
        [
            CheckResult("trace", passed=True, detail="ok"),
            CheckResult("guard", passed=False, detail="dt too large"),
        ],
    )

    assert "trace" in report
    assert "dt too large" in report
    assert "PASS" in report
    assert "FAIL" in report
    assert "checks," in report

    assert format_report([]) == "\nNo checks were run\n"


def test_display_units() -> None:
    """ħ/μeV is about 0.658 ns; natural units pass through."""
    assert to_display_time(2.0, const.Units.NATURAL) == 2.0
    assert to_display_time(1.0, const.Units.UEV) == pytest.approx(0.6582119569)
    assert to_display_rate(1.0, const.Units.UEV) == pytest.approx(1 / 0.6582119569)
