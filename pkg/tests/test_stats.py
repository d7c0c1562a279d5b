"""Unit tests for pair post-selection statistics."""

from __future__ import annotations

import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tridot_entangler import master, stats, trajectory
from tridot_entangler.models import RunConfig, SystemParams, TrajectoryConfig, make_operating_point
from tridot_entangler.trajectory import EventRecord, EventStream
from tridot_entangler.utils import const, exc

A = const.Lead.A
B = const.Lead.B


def _stream(*events: tuple[float, const.Lead], t_max: float = 100.0) -> EventStream:
    return EventStream(events=tuple(EventRecord(t, lead) for t, lead in events), t_max=t_max)


@pytest.fixture(name="tau_grid", scope="module")
def tau_grid_() -> np.typing.NDArray[np.float64]:
    """The τ grid the regime presets ship with."""
    return RunConfig.from_preset("clean").tau_grid()


@pytest.mark.parametrize(
    ("events", "expected"),
    [
        ([(1.0, B), (1.1, A), (50.0, A), (50.05, B)], [(B, A), (A, B)]),
        ([(1.0, A), (1.2, A)], []),
        ([(1.0, B), (1.1, A), (1.15, B)], [(B, A)]),
    ],
)
def test_empirical_pairs(
    events: list[tuple[float, const.Lead]],
    expected: list[tuple[const.Lead, const.Lead]],
) -> None:
    """Consecutive different-lead events within τ pair up, each event at most once."""
    pairs, rate = stats.empirical_pairs(_stream(*events, t_max=100.0), tau=0.5)

    assert [(pair.first_lead, pair.second_lead) for pair in pairs] == expected
    assert rate == len(expected) / 100.0


def test_unsorted_stream_is_rejected() -> None:
    """Scanning assumes time order."""
    with pytest.raises(exc.UnsortedStreamError):
        stats.empirical_pairs(_stream((2.0, A), (1.0, B)), tau=5.0)


def test_event_structure() -> None:
    """Pairs, spacing, ordering and lone events of a hand-made stream."""
    stream = _stream((1.0, B), (1.1, A), (3.0, A), (50.0, B), (50.2, A))
    structure = stats.event_structure(stream, tau=0.5)

    assert structure.n_events == 5
    assert structure.n_pairs == 2
    assert structure.mean_pair_spacing == pytest.approx(49.0)
    assert structure.b_first_fraction == 1.0
    assert structure.lone_fraction == pytest.approx(0.2)

    late = stats.event_structure(stream, tau=0.5, t_start=10.0)
    assert (late.n_events, late.n_pairs) == (2, 1)


def test_empirical_rate_curve() -> None:
    """Counting without consumption grows with τ and is zero at τ = 0."""
    stream = _stream((1.0, B), (1.1, A), (1.15, B), (4.0, A), (9.0, B), t_max=10.0)

    counted = stats.empirical_rate_curve([stream], [0.0, 0.12, 1.0, 10.0], consume=False)
    assert_allclose(counted.r, [0.0, 0.2, 0.2, 0.4])
    assert np.all(counted.r_err >= 0)

    consumed = stats.empirical_rate_curve([stream], [0.0, 0.12, 1.0, 10.0])
    assert_allclose(consumed.r, [0.0, 0.1, 0.1, 0.2])

    with pytest.raises(exc.ConfigurationError):
        stats.empirical_rate_curve([stream], [1.0], t_start=10.0)


def test_fidelity_limits() -> None:
    """F = 1 for certain singlets and 1/4 for a fully mixed pair."""
    assert stats.fidelity(1.0) == 1.0
    assert stats.fidelity(0.0) == 0.25
    assert_allclose(stats.fidelity(np.array([0.5, 0.92])), [0.625, 0.94])


def test_correlations_are_positive_and_decay(fast_params: SystemParams) -> None:
    """C_ij >= 0 up to rounding and vanishes once the exclusive survival has decayed."""
    series = stats.correlation(fast_params, [0.0, 0.5, 1.0, 2.0, 5.0, 100.0])

    for values in (series.c_ab, series.c_ba):
        assert np.all(values >= -stats.INVARIANT_RTOL * np.max(values))
        assert values[-1] < 1e-3 * np.max(values)


def test_invariant_checks_pass_values_through() -> None:
    """Rounding-level violations are returned untouched; larger ones raise."""
    values = np.array([0.0, 1.0, 1.0 - 1e-13, 2.0, -1e-12])

    assert stats.require_nonnegative("c", values) is values
    assert_allclose(stats.require_nondecreasing("r", values[:4]), values[:4], rtol=0)

    with pytest.raises(exc.InvariantViolationError, match="non-negative"):
        stats.require_nonnegative("c", np.array([1.0, -1e-6]))

    with pytest.raises(exc.InvariantViolationError, match="non-decreasing"):
        stats.require_nondecreasing("r", np.array([0.0, 1.0, 0.99]))

    assert stats.require_nondecreasing("r", np.array([3.0])).tolist() == [3.0]


def test_correlation_needs_transport() -> None:
    """With g = 0 there is no current to normalise by."""
    p = make_operating_point(400.0, 100.0, 0.0, 0.0, 1.0, 1.0, 0.5)

    with pytest.raises(exc.NoTransportError):
        stats.correlation(p, [0.0, 1.0])


def test_effective_rate_is_monotone(fast_params: SystemParams) -> None:
    """R(0) = 0 and R never decreases."""
    curve = stats.effective_rate(fast_params, [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 60.0])

    assert curve.r[0] == 0.0
    assert np.all(np.diff(curve.r) >= -stats.INVARIANT_RTOL * curve.r[-1])
    assert curve.r[-1] > 0
    # saturated
    assert curve.r[-1] - curve.r[-2] < 1e-3 * curve.r[-1]


def test_effective_rate_is_coincidence_rate_rescaled(fast_params: SystemParams) -> None:
    """R = (Γ_C / 2) / (<J_A><J_B>) times the coincidence rate."""
    grid = [0.0, 0.5, 2.0, 8.0]
    currents = stats.lead_currents(fast_params)
    scale = 0.5 * fast_params.gamma_c / (currents[A] * currents[B])

    assert_allclose(
        stats.effective_rate(fast_params, grid).r,
        scale * stats.coincidence_rate(fast_params, grid).r,
        rtol=1e-12,
    )


def test_lead_currents_match_steady_output(fast_params: SystemParams) -> None:
    """<J_A> + <J_B> is the steady output current."""
    rho = master.steady_state(master.liouvillian(fast_params))

    assert sum(stats.lead_currents(fast_params).values()) == pytest.approx(
        master.output_current(fast_params, rho),
        rel=1e-10,
    )


def test_empirical_coincidences_match_analytic(fast_params: SystemParams) -> None:
    """Counted coincidences agree with the exclusive-correlator prediction."""
    tau = [0.5, 1.0, 2.0, 4.0]
    cfg = TrajectoryConfig(t_max=1000.0, seed=31, method=const.TrajectoryMethod.WAITING_TIME)
    streams = trajectory.run_ensemble(fast_params, cfg, 10).streams

    counted = stats.empirical_rate_curve(streams, tau, consume=False, t_start=20.0)
    analytic = stats.coincidence_rate(fast_params, tau)

    assert np.all(np.abs(counted.r - analytic.r) <= 4 * counted.r_err + 0.02 * analytic.r)

    scaled = stats.empirical_effective_rate(streams, fast_params, tau, t_start=20.0)
    expected = stats.effective_rate(fast_params, tau)
    assert np.all(np.abs(scaled.r - expected.r) <= 4 * scaled.r_err + 0.02 * expected.r)


@pytest.mark.parametrize("regime", ["clean_params", "dirty_params", "fast_params"])
def test_pair_kernels_and_probability(
    regime: str,
    request: pytest.FixtureRequest,
    tau_grid: np.typing.NDArray[np.float64],
) -> None:
    """0 <= p <= q pointwise, so P stays a probability and F = (1 + 3P) / 4."""
    p: SystemParams = request.getfixturevalue(regime)

    projected, total = stats.pair_kernels(p, tau_grid)
    assert np.all(projected >= -1e-12)
    assert np.all(projected <= total + 1e-12)

    curve = stats.good_pair_probability(p, tau_grid)
    assert np.all((curve.p_good >= 0) & (curve.p_good <= 1))
    assert_allclose(curve.f, (1 + 3 * curve.p_good) / 4)


def test_clean_pairs_have_higher_fidelity(
    clean_params: SystemParams,
    dirty_params: SystemParams,
    tau_grid: np.typing.NDArray[np.float64],
) -> None:
    """At the shared τ*, ordered emission gives the better pairs."""
    star = max(
        stats.regime_tau_star(clean_params, tau_grid),
        stats.regime_tau_star(dirty_params, tau_grid),
    )

    f_clean = stats.good_pair_probability(clean_params, [star]).f[0]
    f_dirty = stats.good_pair_probability(dirty_params, [star]).f[0]

    assert f_clean > f_dirty


def test_rate_curve_combines_rate_and_fidelity(fast_params: SystemParams) -> None:
    """rate_curve carries the same R and P as the separate calls."""
    grid = [0.0, 0.5, 2.0, 8.0]
    curve = stats.rate_curve(fast_params, grid)

    assert_allclose(curve.r, stats.effective_rate(fast_params, grid).r)
    assert_allclose(curve.p_good, stats.good_pair_probability(fast_params, grid).p_good)
    assert curve.kernel_delta[0] == 0.0
    assert curve.kernel.shape == curve.kernel_delta.shape


def test_post_selection_needs_rates() -> None:
    """Zero lead rates or zero coupling cannot define P(τ)."""
    no_source = make_operating_point(400.0, 100.0, 10.0, 0.0, 1.0, 1.0, 0.0)
    with pytest.raises(exc.ConfigurationError):
        stats.good_pair_probability(no_source, [1.0])

    uncoupled = make_operating_point(400.0, 100.0, 0.0, 0.0, 1.0, 1.0, 0.5)
    with pytest.raises(exc.UndefinedMarginError):
        stats.good_pair_probability(uncoupled, [1.0])


@pytest.mark.parametrize("grid", [[], [1.0, 0.5], [-1.0, 1.0], [0.0, float("inf")]])
def test_invalid_grid(fast_params: SystemParams, grid: list[float]) -> None:
    """Grids are non-empty, finite, non-negative and increasing."""
    with pytest.raises(exc.InvalidGridError):
        stats.effective_rate(fast_params, grid)


def test_tau_star_on_a_known_kernel(caplog: pytest.LogCaptureFixture) -> None:
    """τ* is the first node past the peak of Δ e^-Δ below a tenth of it."""
    delta = np.linspace(0.0, 10.0, 101)

    assert stats.tau_star(delta, delta * np.exp(-delta)) == pytest.approx(4.9)

    with caplog.at_level(logging.WARNING, logger="tridot_entangler"):
        assert stats.tau_star(delta, np.ones_like(delta)) == 10.0

    assert "never fell below" in caplog.text

    with pytest.raises(exc.InvalidGridError):
        stats.tau_star(delta, delta[:-1])


@pytest.mark.parametrize("regime", ["clean_params", "dirty_params"])
def test_fidelity_decay_report(
    regime: str,
    request: pytest.FixtureRequest,
    tau_grid: np.typing.NDArray[np.float64],
) -> None:
    """Pairs accepted out to 2/gamma_c are measurably worse than those at τ*."""
    report = stats.fidelity_decay(request.getfixturevalue(regime), tau_grid)

    assert 0.25 <= report.f_late <= 1
    assert 0.25 <= report.f_tau_star <= 1
    assert report.tau_star > 0
    assert report.dropped == (report.f_late < report.f_tau_star - stats.FIDELITY_DROP)
    assert report.dropped


def test_headline_band_report(
    clean_params: SystemParams,
    dirty_params: SystemParams,
    tau_grid: np.typing.NDArray[np.float64],
) -> None:
    """The reported τ lies in [τ*, 2τ*] and each scaled parameter gets two rows."""
    report = stats.headline_band_check(clean_params, dirty_params, tau_grid)

    assert report.tau_star <= report.tau <= 2 * report.tau_star
    assert report.rate_ratio > 0
    assert 0.25 <= report.f_dirty <= 1
    assert 0.25 <= report.f_clean <= 1
    assert [(row.parameter, row.factor) for row in report.sensitivity] == [
        ("gamma_c", 0.8),
        ("gamma_c", 1.25),
        ("g", 0.8),
        ("g", 1.25),
    ]


def test_robustness_report(
    clean_params: SystemParams,
    dirty_params: SystemParams,
    tau_grid: np.typing.NDArray[np.float64],
) -> None:
    """Unequal tunnel couplings keep clean pairs above the fidelity floor and ahead of dirty ones."""
    report = stats.robustness_check(clean_params, dirty_params, tau_grid)

    assert report.g_cb_ratio == 0.8
    assert report.holds == (
        report.f_clean > report.f_dirty and min(report.f_clean, report.f_dirty) > stats.ROBUST_FIDELITY
    )
    assert report.holds
