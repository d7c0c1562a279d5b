"""Fixtures for the benchmark tests."""

from __future__ import annotations

import pytest

from tridot_entangler.models import RunConfig, TrajectoryConfig
from tridot_entangler.utils import const


@pytest.fixture(name="clean_run", scope="session")
def clean_run_() -> RunConfig:
    """The bundled ordered-emission regime."""
    return RunConfig.from_preset("clean")


@pytest.fixture(name="short_trajectory")
def short_trajectory_() -> TrajectoryConfig:
    """About a hundred lead-C refill cycles of waiting-time trajectory."""
    return TrajectoryConfig(t_max=5000.0, seed=1, method=const.TrajectoryMethod.WAITING_TIME)
