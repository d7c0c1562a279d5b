"""Shared fixtures for the unit tests."""

from __future__ import annotations

import numpy as np
import pytest

from tridot_entangler import hilbert
from tridot_entangler.models import RunConfig, SystemParams, make_operating_point


@pytest.fixture(name="clean_params", scope="session")
def clean_params_() -> SystemParams:
    """Ordered-emission regime: gamma_b = 10 gamma_a."""
    return RunConfig.from_preset("clean").system_params()


@pytest.fixture(name="dirty_params", scope="session")
def dirty_params_() -> SystemParams:
    """Overlapping-cycle regime: gamma_b = gamma_a."""
    return RunConfig.from_preset("dirty").system_params()


@pytest.fixture(name="fast_params", scope="session")
def fast_params_() -> SystemParams:
    """Small couplings and comparable rates, for quick stochastic checks."""
    return make_operating_point(400.0, 100.0, 2.0, 0.0, 1.0, 1.0, 0.5)


@pytest.fixture(name="vacuum")
def vacuum_() -> np.typing.NDArray[np.complex128]:
    """Empty cluster as a density matrix."""
    rho = np.zeros((12, 12), dtype=np.complex128)
    rho[hilbert.VACUUM, hilbert.VACUUM] = 1.0
    return rho
