"""Unit tests for the deterministic master-equation solvers."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tridot_entangler import hilbert, master
from tridot_entangler.models import SystemParams, make_operating_point
from tridot_entangler.utils import const, exc

if TYPE_CHECKING:
    from numpy.typing import NDArray


def test_superoperator_conventions() -> None:
    """spre, spost and sandwich act as left, right and two-sided products."""
    rng = np.random.default_rng(3)
    a, b, x = (rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12)) for _ in range(3))

    assert_allclose(master.unvec(master.spre(a) @ master.vec(x)), a @ x)
    assert_allclose(master.unvec(master.spost(b) @ master.vec(x)), x @ b)
    assert_allclose(master.unvec(master.sandwich(a) @ master.vec(x)), a @ x @ a.conj().T)
    assert_allclose(master.expectation_row(a) @ master.vec(x), np.trace(a @ x))


@pytest.mark.parametrize("choice", list(const.HamiltonianChoice))
def test_trace_and_positivity(
    fast_params: SystemParams,
    vacuum: NDArray[np.complex128],
    choice: const.HamiltonianChoice,
) -> None:
    """Evolution keeps unit trace and a positive semidefinite state."""
    generator = master.liouvillian(fast_params, choice)

    for t in (0.1, 1.0, 10.0):
        rho = master.evolve(vacuum, generator, t)
        assert abs(np.trace(rho) - 1) < 1e-10
        assert np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) >= -1e-8


@pytest.mark.parametrize("g", [1.0, 10.0])
def test_closed_triple_rabi_oscillation(g: float) -> None:
    """Without leads |002> oscillates through the triple at frequency sqrt(3) g."""
    p = make_operating_point(400.0, 100.0, g, 0.0, 0.0, 0.0, 0.0)
    generator = master.liouvillian(p)
    rho0 = np.zeros((12, 12), dtype=np.complex128)
    rho0[hilbert.KET_002, hilbert.KET_002] = 1.0

    for t in np.linspace(0.0, 4.0 / g, 9):
        populations = np.real(np.diag(master.evolve(rho0, generator, float(t))))
        phase = np.cos(np.sqrt(3) * g * t)

        assert_allclose(populations[hilbert.KET_002], (1 / 3 + 2 / 3 * phase) ** 2, atol=1e-10)
        assert_allclose(populations[hilbert.KET_110], 2 / 9 * (1 - phase) ** 2, atol=1e-10)
        assert_allclose(
            populations[hilbert.KET_101],
            1 - (1 / 3 + 2 / 3 * phase) ** 2 - 2 / 9 * (1 - phase) ** 2,
            atol=1e-10,
        )


def test_closed_cluster_conserves_each_charge_sector() -> None:
    """With every rate at zero the full Hamiltonian never moves weight between sectors."""
    p = make_operating_point(400.0, 100.0, 10.0, 0.0, 0.0, 0.0, 0.0)
    generator = master.liouvillian(p, const.HamiltonianChoice.FULL)
    charge = np.real(np.diag(hilbert.total_charge())).round().astype(int)

    rho0 = np.diag(np.random.default_rng(5).dirichlet(np.ones(12))).astype(np.complex128)
    before = np.bincount(charge, weights=np.real(np.diag(rho0)))

    for t in (0.01, 0.3, 2.0):
        after = np.bincount(charge, weights=np.real(np.diag(master.evolve(rho0, generator, t))))
        assert_allclose(after, before, atol=1e-10)


def test_runge_kutta_cross_check(
    fast_params: SystemParams,
    vacuum: NDArray[np.complex128],
) -> None:
    """The matrix exponential agrees with adaptive integration."""
    generator = master.liouvillian(fast_params)

    assert_allclose(
        master.evolve(vacuum, generator, 3.0),
        master.evolve(vacuum, generator, 3.0, method="rk"),
        atol=1e-8,
    )


def test_evolve_rejects_bad_input(
    fast_params: SystemParams,
    vacuum: NDArray[np.complex128],
) -> None:
    """Negative times and non-finite states are refused; t=0 is the identity."""
    generator = master.liouvillian(fast_params)

    assert_allclose(master.evolve(vacuum, generator, 0.0), vacuum)

    with pytest.raises(exc.NegativeDurationError, match="t=-1"):
        master.evolve(vacuum, generator, -1.0)

    with pytest.raises(exc.NonFiniteInputError):
        master.evolve(vacuum * np.nan, generator, 1.0)


def test_exclusive_generator_loses_trace(
    fast_params: SystemParams,
    vacuum: NDArray[np.complex128],
) -> None:
    """Without the A/B sandwiches the trace is the no-emission probability."""
    generator = master.exclusive_liouvillian(fast_params)
    traces = [np.real(np.trace(master.evolve(vacuum, generator, t))) for t in (0, 1, 2, 5, 10)]

    assert traces[0] == 1.0
    assert all(b <= a + 1e-12 for a, b in zip(traces, traces[1:], strict=False))
    assert traces[-1] < 0.9
    assert generator.kind == const.SuperoperatorKind.NO_JUMP_AB


@pytest.mark.parametrize("regime", ["clean_params", "dirty_params", "fast_params"])
def test_steady_state(regime: str, request: pytest.FixtureRequest) -> None:
    """The stationary state is a valid density matrix with balanced currents."""
    p: SystemParams = request.getfixturevalue(regime)
    generator = master.liouvillian(p)
    rho = master.steady_state(generator)

    assert abs(np.trace(rho) - 1) < 1e-10
    assert_allclose(rho, rho.conj().T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(rho)) >= -1e-8
    assert np.linalg.norm(generator.matrix @ master.vec(rho)) < 1e-10 * max(generator.norm, 1)

    i_in, i_out = master.input_current(p, rho), master.output_current(p, rho)
    assert abs(i_in - i_out) < 1e-9 * i_out


def test_clean_steady_state_drains_b_first(clean_params: SystemParams) -> None:
    """The fast B drain leaves dot B less occupied than dot A."""
    rho = master.steady_state(master.liouvillian(clean_params))
    n_a, n_b, _ = hilbert.number_ops()

    assert np.real(np.trace(n_b @ rho)) < np.real(np.trace(n_a @ rho))


def test_steady_state_with_full_hamiltonian(clean_params: SystemParams) -> None:
    """The full Hamiltonian also has a unique transporting steady state."""
    rho = master.steady_state(master.liouvillian(clean_params, const.HamiltonianChoice.FULL))

    assert master.output_current(clean_params, rho) > 0


def test_long_time_evolution_reaches_steady_state(
    fast_params: SystemParams,
    vacuum: NDArray[np.complex128],
) -> None:
    """Any initial state relaxes to the stationary state."""
    generator = master.liouvillian(fast_params)

    assert_allclose(master.evolve(vacuum, generator, 400.0), master.steady_state(generator), atol=1e-8)


def test_zero_coupling_has_no_transport() -> None:
    """With g = 0 the only stationary state is the full, isolated dot C."""
    p = make_operating_point(400.0, 100.0, 0.0, 0.0, 1.0, 1.0, 0.5)
    generator = master.liouvillian(p)

    basis = master.stationary_basis(generator)
    assert len(basis) == 1
    rho = basis[0] / np.trace(basis[0])
    assert abs(rho[hilbert.KET_002, hilbert.KET_002] - 1) < 1e-8

    with pytest.raises(exc.NoTransportError) as exc_info:
        master.steady_state(generator)

    assert exc_info.value.dimension == 1


def test_closed_cluster_is_degenerate() -> None:
    """Without leads every charge sector is stationary."""
    p = make_operating_point(400.0, 100.0, 10.0, 0.0, 0.0, 0.0, 0.0)

    with pytest.raises(exc.DegenerateSteadyStateError) as exc_info:
        master.steady_state(master.liouvillian(p))

    assert exc_info.value.dimension > 1


def test_chain_hamiltonian_layout() -> None:
    """The two-electron chain has |011> detuned and the singlet factors on |002>."""
    h = master.chain_hamiltonian(3.0, 2.0, 1.5)

    assert_allclose(h, h.T)
    assert h[3, 3] == -3.0
    assert_allclose(h[0, 1], hilbert.SQRT2 * 2.0)
    assert_allclose(h[0, 3], hilbert.SQRT2 * 1.5)
    assert h[0, 2] == 0


def test_resonant_average_is_one_sixth() -> None:
    """With no detuning |011> holds a sixth of the population on average."""
    assert_allclose(master.infinite_time_average(master.chain_hamiltonian(0, 1), 0, 3), 1 / 6)


@pytest.mark.parametrize("g", [1.0, 5.0])
@pytest.mark.parametrize("delta_over_g", [0.0, 20.0])
def test_eigen_average_matches_time_average(g: float, delta_over_g: float) -> None:
    """The eigenprojector formula agrees with direct propagation over T = 200/g."""
    h = master.chain_hamiltonian(delta_over_g * g, g)

    assert abs(
        master.infinite_time_average(h, 0, 3) - master.time_averaged_population(h, 0, 3, 200 / g),
    ) < 1e-3


def test_suppression_scan(clean_params: SystemParams) -> None:
    """Large detuning suppresses |011>; the undetuned point is the scan maximum."""
    delta = np.linspace(0.0, 40.0, 81).tolist()
    g_grid = [1.0, 5.0, 10.0, 20.0]
    rows = master.suppression_scan(clean_params, delta, g_grid, relative=True)

    assert len(rows) == len(delta) * len(g_grid)
    for g in g_grid:
        per_g = [r for r in rows if r.g == g]
        assert max(per_g, key=lambda r: r.p011_avg).delta == 0.0
        assert per_g[0].p011_avg > 0.1
        assert next(r for r in per_g if np.isclose(r.delta, 20 * g)).p011_avg < 0.02


def test_suppression_scan_needs_grids(clean_params: SystemParams) -> None:
    """Empty grids are a configuration error."""
    with pytest.raises(exc.InvalidGridError):
        master.suppression_scan(clean_params, [], [1.0])
