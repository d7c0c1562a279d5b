"""Post-selection statistics of the emitted electron pairs.

Analytic quantities are built from exclusive two-time correlators: an emission on
lead i, event-free evolution under L_nj for a time Δ, then an emission on lead j.
Empirical estimators fold over event streams from the trajectory module.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import pairwise
from logging import getLogger
from typing import TYPE_CHECKING, Final, NamedTuple, Self

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.linalg import LinAlgError, expm, solve

from tridot_entangler import hilbert, master, trajectory
from tridot_entangler.models import TrajectoryConfig
from tridot_entangler.utils import const, exc

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from tridot_entangler.models import SystemParams
    from tridot_entangler.trajectory import EventStream

LOGGER = getLogger(__name__)

FloatArray = NDArray[np.float64]

MIN_SUBDIVISIONS: Final[int] = 4
MAX_SUBDIVISIONS: Final[int] = 2**14
KERNEL_FLOOR: Final[float] = -1e-10
INVARIANT_RTOL: Final[float] = 1e-10

RATE_RATIO_BAND: Final[tuple[float, float]] = (0.77, 0.87)
F_DIRTY_BAND: Final[tuple[float, float]] = (0.88, 0.92)
F_CLEAN_BAND: Final[tuple[float, float]] = (0.92, 0.96)
SENSITIVITY_FACTORS: Final[tuple[float, ...]] = (0.8, 1.25)
FIDELITY_DROP: Final[float] = 0.03
ROBUST_FIDELITY: Final[float] = 0.85
B_FIRST_MIN: Final[float] = 0.9
LONE_MAX: Final[float] = 0.05
SPACING_TOL: Final[float] = 0.15
DIRTY_LONE_FACTOR: Final[float] = 2.0
STRUCTURE_DURATION_OVER_GAMMA_C: Final[float] = 1e4
PAIR_WINDOW_OVER_GAMMA_A: Final[float] = 5.0

_PAIRS: Final[tuple[tuple[const.Lead, const.Lead], ...]] = (
    (const.Lead.A, const.Lead.B),
    (const.Lead.B, const.Lead.A),
)


@dataclass(frozen=True)
class CorrelationSeries:
    """Normalised exclusive correlators C_AB (A first) and C_BA (B first)."""

    delta_grid: FloatArray
    c_ab: FloatArray
    c_ba: FloatArray


@dataclass(frozen=True)
class RateCurve:
    """Quantities tabulated against the post-selection window τ.

    Analytic curves fill `r` and/or `p_good`/`f`; empirical curves fill `r` and
    `r_err`. `kernel_delta`/`kernel` hold the fine samples of dR/dτ.
    """

    tau_grid: FloatArray
    r: FloatArray | None = None
    r_err: FloatArray | None = None
    p_good: FloatArray | None = None
    f: FloatArray | None = None
    kernel_delta: FloatArray | None = None
    kernel: FloatArray | None = None


class PairRecord(NamedTuple):
    """Two consecutive emissions on different leads, within the window."""

    t_first: float
    t_second: float
    first_lead: const.Lead
    second_lead: const.Lead


class EventStructure(NamedTuple):
    """Summary of the pair structure of one event stream."""

    n_events: int
    n_pairs: int
    mean_pair_spacing: float
    b_first_fraction: float
    lone_fraction: float


class SensitivityRow(NamedTuple):
    """Headline figures after scaling one parameter in both regimes."""

    parameter: str
    factor: float
    rate_ratio: float
    f_clean: float
    f_dirty: float


@dataclass(frozen=True)
class BandReport:
    """Result of searching [τ*, 2τ*] for the headline clean/dirty comparison."""

    found: bool
    tau: float
    tau_star: float
    rate_ratio: float
    f_clean: float
    f_dirty: float
    sensitivity: tuple[SensitivityRow, ...] = ()


class FidelityDecay(NamedTuple):
    """Fidelity at τ* compared with the fidelity at τ = 2/Γ_C."""

    tau_star: float
    f_tau_star: float
    f_late: float
    dropped: bool


class RobustnessReport(NamedTuple):
    """Clean/dirty fidelities with unmatched C-A and C-B couplings."""

    g_cb_ratio: float
    tau_star: float
    f_clean: float
    f_dirty: float
    holds: bool


class StructureReport(NamedTuple):
    """Clean and dirty event structure judged against the ordered-pair targets."""

    tau: float
    t_max: float
    clean: EventStructure
    dirty: EventStructure
    spacing_ok: bool
    b_first_ok: bool
    lone_ok: bool
    dirty_lone_ok: bool

    @property
    def passed(self) -> bool:
        """Whether every target is met."""
        return self.spacing_ok and self.b_first_ok and self.lone_ok and self.dirty_lone_ok


@dataclass(frozen=True)
class _Context:
    """Steady state and exclusive generator of one parameter set."""

    params: SystemParams
    l_nj: master.SuperMatrix
    rho_ss: master.DensityMatrix
    jumps: dict[const.Lead, master.SuperMatrix]
    currents: dict[const.Lead, float]

    @classmethod
    def build(cls, p: SystemParams, hamiltonian: const.HamiltonianChoice) -> Self:
        rho_ss = master.steady_state(master.liouvillian(p, hamiltonian))
        jumps = {lead: master.jump_superoperator(p, lead) for lead in const.Lead}
        rho_vec = master.vec(rho_ss)
        trace = master.trace_row()
        currents = {lead: float(np.real(trace @ jumps[lead] @ rho_vec)) for lead in const.Lead}

        return cls(
            params=p,
            l_nj=master.exclusive_liouvillian(p, hamiltonian).matrix,
            rho_ss=rho_ss,
            jumps=jumps,
            currents=currents,
        )

    def require_currents(self) -> None:
        for lead, current in self.currents.items():
            if current <= 1e-14 * max(self.params.max_rate, 1e-300):
                raise exc.ZeroCurrentError(lead)


@lru_cache(maxsize=16)
def _context(p: SystemParams, hamiltonian: const.HamiltonianChoice) -> _Context:
    return _Context.build(p, hamiltonian)


def _validated_grid(name: str, grid: Sequence[float] | FloatArray) -> FloatArray:
    values = np.asarray(grid, dtype=np.float64)

    if values.ndim != 1 or values.size == 0:
        raise exc.InvalidGridError(name, "must be a non-empty 1-d grid")

    if values[0] < 0 or np.any(np.diff(values) <= 0) or not np.all(np.isfinite(values)):
        raise exc.InvalidGridError(name, "must be finite, non-negative and strictly increasing")

    return values


class _KernelSamples(NamedTuple):
    delta: FloatArray
    values: FloatArray
    integrals: FloatArray


def _integrate_kernels(
    generator: master.SuperMatrix,
    rows: NDArray[np.complex128],
    vectors: NDArray[np.complex128],
    tau_grid: FloatArray,
    *,
    rtol: float = const.INTEGRATION_RTOL,
) -> _KernelSamples:
    """Integrate f_k(Δ) = rows[k] . exp(generator Δ) . vectors[:, k] from 0 to every τ.

    Each τ interval is split into uniform panels whose count doubles until the panel
    trapezoid changes by less than `rtol`.
    """
    nodes = tau_grid if tau_grid[0] == 0 else np.concatenate(([0.0], tau_grid))

    step = lru_cache(maxsize=32)(lambda h: expm(generator * h))

    def evaluate(v: NDArray[np.complex128]) -> FloatArray:
        return np.real(np.einsum("ki,ik->k", rows, v))

    current = np.array(vectors, dtype=np.complex128)
    deltas = [np.zeros(1)]
    values = [evaluate(current)[None, :]]
    peak = float(np.max(np.abs(values[0])))

    for a, b in pairwise(nodes):
        n_sub = MIN_SUBDIVISIONS
        previous: FloatArray | None = None

        while True:
            h = (b - a) / n_sub
            propagator = step(h)
            cur = current
            panel = [values[-1][-1]]
            for _ in range(n_sub):
                cur = propagator @ cur
                panel.append(evaluate(cur))

            samples = np.array(panel)
            integral = trapezoid(samples, dx=h, axis=0)
            peak = max(peak, float(np.max(np.abs(samples))))

            if previous is not None:
                error = np.abs(integral - previous)
                tolerance = rtol * np.abs(integral) + rtol * 1e-6 * peak * (b - a)
                if np.all(error <= tolerance):
                    break

            if n_sub >= MAX_SUBDIVISIONS:
                raise exc.IntegrationError(
                    f"Kernel integral on [{a:g}, {b:g}] did not converge in {n_sub} panels",
                )

            previous = integral
            n_sub *= 2

        LOGGER.debug("Interval [%g, %g] converged with %i panels", a, b, n_sub)

        current = cur
        deltas.append(np.linspace(a, b, n_sub + 1)[1:])
        values.append(samples[1:])

    delta = np.concatenate(deltas)
    kernel = np.concatenate(values, axis=0)
    cumulative = cumulative_trapezoid(kernel, delta, axis=0, initial=0)

    node_positions = np.searchsorted(delta, nodes)
    integrals = cumulative[node_positions]
    if tau_grid[0] != 0:
        integrals = integrals[1:]

    return _KernelSamples(delta, kernel, integrals)


def _propagate_samples(
    generator: master.SuperMatrix,
    rows: NDArray[np.complex128],
    vectors: NDArray[np.complex128],
    delta_grid: FloatArray,
) -> FloatArray:
    """Evaluate f_k(Δ) at the grid points only."""
    current = np.array(vectors, dtype=np.complex128)
    out = np.empty((delta_grid.size, rows.shape[0]))
    last = 0.0

    for n, delta in enumerate(delta_grid):
        if delta > last:
            current = expm(generator * (delta - last)) @ current
            last = delta
        out[n] = np.real(np.einsum("ki,ik->k", rows, current))

    return out


def _correlation_components(ctx: _Context) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Rows/vectors of the unnormalised correlators N_AB, N_BA."""
    rho_vec = master.vec(ctx.rho_ss)
    trace = master.trace_row()

    rows = np.stack([trace @ ctx.jumps[j] for _, j in _PAIRS])
    vectors = np.stack([ctx.jumps[i] @ rho_vec for i, _ in _PAIRS], axis=1)

    return rows, vectors


def first_epoch_state(ctx: _Context) -> master.DensityMatrix:
    """Time-integrated event-free state Σ_0 = (-L_nj)^-1 (P0 ρ_SS P0), P0 = (1-n_A)(1-n_B)."""
    n_a, n_b, _ = hilbert.number_ops()
    eye = np.eye(const.DIM, dtype=np.complex128)
    projector = (eye - n_a) @ (eye - n_b)
    rho_0 = projector @ ctx.rho_ss @ projector

    try:
        sigma = solve(-ctx.l_nj, master.vec(rho_0))
    except LinAlgError as err:
        raise exc.NumericalError(f"Exclusive generator is singular: {err}") from err

    return master.unvec(sigma)


def _pair_components(ctx: _Context) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Rows/vectors of p_AB, p_BA (projected) followed by q_AB, q_BA."""
    n_ops = dict(zip(const.Lead, hilbert.number_ops()[:2], strict=True))
    eye = np.eye(const.DIM, dtype=np.complex128)
    trace = master.trace_row()
    sigma = master.vec(first_epoch_state(ctx))

    rows = []
    vectors = []
    for i, j in _PAIRS:
        rows.append(trace @ master.projector_sandwich(eye - n_ops[i]) @ ctx.jumps[j])
        vectors.append(master.projector_sandwich(n_ops[j]) @ ctx.jumps[i] @ sigma)
    for i, j in _PAIRS:
        rows.append(trace @ ctx.jumps[j])
        vectors.append(ctx.jumps[i] @ sigma)

    return np.stack(rows), np.stack(vectors, axis=1)


def require_nonnegative(name: str, values: FloatArray) -> FloatArray:
    """Return `values` unchanged if no entry is below -INVARIANT_RTOL * max|values|."""
    worst = float(np.min(values, initial=0.0))
    if worst < -INVARIANT_RTOL * float(np.max(np.abs(values), initial=0.0)):
        raise exc.InvariantViolationError(name, "non-negative", worst)

    return values


def require_nondecreasing(name: str, values: FloatArray) -> FloatArray:
    """Return `values` unchanged if no step falls by more than INVARIANT_RTOL * max|values|."""
    worst = float(np.min(np.diff(values), initial=0.0))
    if worst < -INVARIANT_RTOL * float(np.max(np.abs(values), initial=0.0)):
        raise exc.InvariantViolationError(name, "non-decreasing", worst)

    return values


def _require_rates(p: SystemParams) -> None:
    if min(p.gamma_a, p.gamma_b, p.gamma_c) <= 0:
        raise exc.ConfigurationError("Post-selection needs positive gamma_a, gamma_b and gamma_c")

    if p.g == 0:
        raise exc.UndefinedMarginError


def correlation(
    p: SystemParams,
    delta_grid: Sequence[float] | FloatArray,
    *,
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> CorrelationSeries:
    """C_ij(Δ) = Tr[J_j e^{L_nj Δ} J_i ρ_SS] / (<J_j><J_i>).

    Raises:
        ZeroCurrentError: if either lead carries no steady current
    """
    grid = _validated_grid("delta_grid", delta_grid)
    ctx = _context(p, hamiltonian)
    ctx.require_currents()

    rows, vectors = _correlation_components(ctx)
    raw = _propagate_samples(ctx.l_nj, rows, vectors, grid)
    norm = ctx.currents[const.Lead.A] * ctx.currents[const.Lead.B]

    return CorrelationSeries(
        delta_grid=grid,
        c_ab=require_nonnegative("c_ab", raw[:, 0] / norm),
        c_ba=require_nonnegative("c_ba", raw[:, 1] / norm),
    )


def _rate_parts(ctx: _Context, grid: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
    """R(τ), and the fine samples of dR/dτ."""
    rows, vectors = _correlation_components(ctx)
    samples = _integrate_kernels(ctx.l_nj, rows, vectors, grid)
    scale = 0.5 * ctx.params.gamma_c / (ctx.currents[const.Lead.A] * ctx.currents[const.Lead.B])

    rate = scale * samples.integrals.sum(axis=1)
    kernel = scale * samples.values.sum(axis=1)

    return require_nondecreasing("effective_rate", rate), samples.delta, kernel


def effective_rate(
    p: SystemParams,
    tau_grid: Sequence[float] | FloatArray,
    *,
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> RateCurve:
    """Good-pair rate R(τ) = (Γ_C/2) ∫_0^τ (C_AB + C_BA) dΔ."""
    grid = _validated_grid("tau_grid", tau_grid)
    ctx = _context(p, hamiltonian)
    ctx.require_currents()

    rate, kernel_delta, kernel = _rate_parts(ctx, grid)

    return RateCurve(tau_grid=grid, r=rate, kernel_delta=kernel_delta, kernel=kernel)


def coincidence_rate(
    p: SystemParams,
    tau_grid: Sequence[float] | FloatArray,
    *,
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> RateCurve:
    """Pairs per unit time whose second event, on the other lead, follows within τ.

    This is the quantity counted by `empirical_rate_curve(..., consume=False)`.
    """
    grid = _validated_grid("tau_grid", tau_grid)
    ctx = _context(p, hamiltonian)

    rows, vectors = _correlation_components(ctx)
    samples = _integrate_kernels(ctx.l_nj, rows, vectors, grid)

    return RateCurve(
        tau_grid=grid,
        r=require_nondecreasing("coincidence_rate", samples.integrals.sum(axis=1)),
        kernel_delta=samples.delta,
        kernel=samples.values.sum(axis=1),
    )


def pair_kernels(
    p: SystemParams,
    delta_grid: Sequence[float] | FloatArray,
    *,
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> tuple[FloatArray, FloatArray]:
    """Projected and unprojected pair kernels p(Δ) and q(Δ) on a grid."""
    _require_rates(p)
    grid = _validated_grid("delta_grid", delta_grid)
    ctx = _context(p, hamiltonian)

    rows, vectors = _pair_components(ctx)
    raw = _propagate_samples(ctx.l_nj, rows, vectors, grid)

    return raw[:, 0] + raw[:, 1], raw[:, 2] + raw[:, 3]


def _probability_parts(ctx: _Context, grid: FloatArray) -> FloatArray:
    rows, vectors = _pair_components(ctx)
    samples = _integrate_kernels(ctx.l_nj, rows, vectors, grid)

    numerator = samples.integrals[:, 0] + samples.integrals[:, 1]
    denominator = samples.integrals[:, 2] + samples.integrals[:, 3]
    p0 = samples.values[0, 0] + samples.values[0, 1]
    q0 = samples.values[0, 2] + samples.values[0, 3]

    if np.min(samples.values) < KERNEL_FLOOR * max(float(np.max(samples.values)), 1.0):
        raise exc.ConsistencyError("min pair kernel", float(np.min(samples.values)))

    positive = denominator > 0
    if not np.all(positive):
        if q0 <= 0:
            raise exc.IntegrationError("Pair denominator vanishes; tau grid too small")
        LOGGER.debug("Using the Δ -> 0 limit p(0)/q(0) = %g at τ = 0", p0 / q0)

    probability = np.where(
        positive,
        numerator / np.where(positive, denominator, 1.0),
        p0 / q0 if q0 > 0 else 0.0,
    )

    bad = (probability < -const.PROBABILITY_SLACK) | (probability > 1 + const.PROBABILITY_SLACK)
    if np.any(bad):
        raise exc.ConsistencyError("P(tau)", float(probability[bad][0]))

    return np.clip(probability, 0.0, 1.0)


def fidelity(p_good: FloatArray | float) -> FloatArray | float:
    """Bell-pair fidelity of a mixture that is the singlet with probability P."""
    return (1 + 3 * p_good) / 4  # type: ignore[no-any-return]


def good_pair_probability(
    p: SystemParams,
    tau_grid: Sequence[float] | FloatArray,
    *,
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> RateCurve:
    """P(τ), the probability that a selected pair came from the entangling sequence, and F(τ).

    Raises:
        ConfigurationError: if any lead rate is zero
        UndefinedMarginError: if g is zero
        IntegrationError: if the pair denominator vanishes on the grid
        ConsistencyError: if P leaves [0, 1]
    """
    _require_rates(p)
    grid = _validated_grid("tau_grid", tau_grid)
    ctx = _context(p, hamiltonian)

    probability = _probability_parts(ctx, grid)

    return RateCurve(tau_grid=grid, p_good=probability, f=fidelity(probability))  # type: ignore[arg-type]


def rate_curve(
    p: SystemParams,
    tau_grid: Sequence[float] | FloatArray,
    *,
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> RateCurve:
    """R(τ), P(τ) and F(τ) together, sharing one steady-state solve."""
    _require_rates(p)
    grid = _validated_grid("tau_grid", tau_grid)
    ctx = _context(p, hamiltonian)
    ctx.require_currents()

    rate, kernel_delta, kernel = _rate_parts(ctx, grid)
    probability = _probability_parts(ctx, grid)

    return RateCurve(
        tau_grid=grid,
        r=rate,
        p_good=probability,
        f=fidelity(probability),  # type: ignore[arg-type]
        kernel_delta=kernel_delta,
        kernel=kernel,
    )


def tau_star(
    delta: FloatArray,
    kernel: FloatArray,
    *,
    fraction: float = const.TAU_STAR_FRACTION,
) -> float:
    """End of the fast rise of R: first Δ past the kernel peak below `fraction` of it."""
    if delta.size == 0 or delta.shape != kernel.shape:
        raise exc.InvalidGridError("kernel", "needs matching non-empty samples")

    peak = int(np.argmax(kernel))
    below = np.nonzero(kernel[peak:] < fraction * kernel[peak])[0]

    if below.size == 0:
        LOGGER.warning("Rate kernel never fell below %g of its peak; using the last node", fraction)
        return float(delta[-1])

    return float(delta[peak + below[0]])


def regime_tau_star(
    p: SystemParams,
    tau_grid: Sequence[float] | FloatArray,
    *,
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> float:
    """τ* of one parameter set, from the fine kernel samples on `tau_grid`."""
    curve = effective_rate(p, tau_grid, hamiltonian=hamiltonian)
    return tau_star(curve.kernel_delta, curve.kernel)  # type: ignore[arg-type]


def _headline(
    clean: SystemParams,
    dirty: SystemParams,
    grid: FloatArray,
    hamiltonian: const.HamiltonianChoice,
) -> tuple[FloatArray, FloatArray, FloatArray]:
    c = rate_curve(clean, grid, hamiltonian=hamiltonian)
    d = rate_curve(dirty, grid, hamiltonian=hamiltonian)

    ratio = np.divide(d.r, c.r, out=np.zeros_like(grid), where=c.r > 0)  # type: ignore[arg-type]

    return ratio, c.f, d.f  # type: ignore[return-value]


def _band_distance(value: FloatArray, band: tuple[float, float]) -> FloatArray:
    lo, hi = band
    return np.maximum(lo - value, 0) / (hi - lo) + np.maximum(value - hi, 0) / (hi - lo)


def headline_band_check(
    clean: SystemParams,
    dirty: SystemParams,
    tau_grid: Sequence[float] | FloatArray,
    *,
    n_band: int = 41,
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
    sensitivity: bool = True,
) -> BandReport:
    """Look for τ in [τ*, 2τ*] where the clean/dirty rate ratio and both fidelities sit in band.

    τ* is the larger of the two regimes' τ*, found on `tau_grid`. When no τ qualifies
    the closest one is reported, and the sensitivity rows show how the figures move
    when Γ_C or g is scaled in both regimes.
    """
    star = max(
        regime_tau_star(clean, tau_grid, hamiltonian=hamiltonian),
        regime_tau_star(dirty, tau_grid, hamiltonian=hamiltonian),
    )
    band = np.linspace(star, 2 * star, n_band)

    ratio, f_clean, f_dirty = _headline(clean, dirty, band, hamiltonian)
    distance = (
        _band_distance(ratio, RATE_RATIO_BAND)
        + _band_distance(f_dirty, F_DIRTY_BAND)
        + _band_distance(f_clean, F_CLEAN_BAND)
    )
    best = int(np.argmin(distance))
    found = bool(distance[best] == 0)

    rows: list[SensitivityRow] = []
    if sensitivity:
        at = np.array([band[best]])
        for parameter in ("gamma_c", "g"):
            for factor in SENSITIVITY_FACTORS:
                c = clean.model_copy(update={parameter: getattr(clean, parameter) * factor})
                d = dirty.model_copy(update={parameter: getattr(dirty, parameter) * factor})
                s_ratio, s_clean, s_dirty = _headline(c, d, at, hamiltonian)
                rows.append(
                    SensitivityRow(
                        parameter,
                        factor,
                        float(s_ratio[0]),
                        float(s_clean[0]),
                        float(s_dirty[0]),
                    ),
                )

    report = BandReport(
        found=found,
        tau=float(band[best]),
        tau_star=star,
        rate_ratio=float(ratio[best]),
        f_clean=float(f_clean[best]),
        f_dirty=float(f_dirty[best]),
        sensitivity=tuple(rows),
    )

    if found:
        LOGGER.info("Headline band met at tau=%g (tau*=%g)", report.tau, star)
    else:
        LOGGER.warning(
            "Headline band not met on [%g, %g]; closest tau=%g gives R_d/R_c=%.3f,"
            " F_clean=%.3f, F_dirty=%.3f",
            star,
            2 * star,
            report.tau,
            report.rate_ratio,
            report.f_clean,
            report.f_dirty,
        )

    return report


def fidelity_decay(
    p: SystemParams,
    tau_grid: Sequence[float] | FloatArray,
    *,
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> FidelityDecay:
    """Compare F(τ*) with F(2/Γ_C)."""
    star = regime_tau_star(p, tau_grid, hamiltonian=hamiltonian)
    late = 2 / p.gamma_c
    points = np.array(sorted({star, late}))

    curve = good_pair_probability(p, points, hamiltonian=hamiltonian)
    values = dict(zip(points.tolist(), curve.f.tolist(), strict=True))  # type: ignore[union-attr]

    return FidelityDecay(
        tau_star=star,
        f_tau_star=values[star],
        f_late=values[late],
        dropped=values[late] < values[star] - FIDELITY_DROP,
    )


def robustness_check(
    clean: SystemParams,
    dirty: SystemParams,
    tau_grid: Sequence[float] | FloatArray,
    *,
    g_cb_ratio: float = 0.8,
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> RobustnessReport:
    """Repeat the clean/dirty fidelity comparison with g_cb = ratio * g."""
    clean = clean.model_copy(update={"g_cb": g_cb_ratio * clean.g})
    dirty = dirty.model_copy(update={"g_cb": g_cb_ratio * dirty.g})

    star = max(
        regime_tau_star(clean, tau_grid, hamiltonian=hamiltonian),
        regime_tau_star(dirty, tau_grid, hamiltonian=hamiltonian),
    )
    at = np.array([star])
    f_clean = float(good_pair_probability(clean, at, hamiltonian=hamiltonian).f[0])  # type: ignore[index]
    f_dirty = float(good_pair_probability(dirty, at, hamiltonian=hamiltonian).f[0])  # type: ignore[index]

    return RobustnessReport(
        g_cb_ratio=g_cb_ratio,
        tau_star=star,
        f_clean=f_clean,
        f_dirty=f_dirty,
        holds=f_clean > f_dirty and min(f_clean, f_dirty) > ROBUST_FIDELITY,
    )


def _checked_events(stream: EventStream, t_start: float = 0.0) -> list[tuple[float, const.Lead]]:
    events = [(e.time, e.lead) for e in stream.events]

    for index in range(1, len(events)):
        if events[index][0] < events[index - 1][0]:
            raise exc.UnsortedStreamError(index)

    return [e for e in events if e[0] >= t_start]


def _scan_pairs(
    events: Sequence[tuple[float, const.Lead]],
    tau: float,
    *,
    consume: bool,
) -> list[PairRecord]:
    pairs: list[PairRecord] = []
    i = 0

    while i < len(events) - 1:
        (t1, lead1), (t2, lead2) = events[i], events[i + 1]

        if lead1 != lead2 and t2 - t1 <= tau:
            pairs.append(PairRecord(t1, t2, lead1, lead2))
            i += 2 if consume else 1
        else:
            i += 1

    return pairs


def empirical_pairs(stream: EventStream, tau: float) -> tuple[list[PairRecord], float]:
    """Pair off consecutive events on different leads within τ, each event used once.

    Returns:
        tuple: the pairs and the pair rate (pairs per unit time)

    Raises:
        UnsortedStreamError: if the stream is not time-ordered
    """
    pairs = _scan_pairs(_checked_events(stream), tau, consume=True)
    rate = len(pairs) / stream.t_max if stream.t_max > 0 else 0.0

    return pairs, rate


def empirical_rate_curve(
    streams: Iterable[EventStream],
    tau_grid: Sequence[float] | FloatArray,
    *,
    consume: bool = True,
    t_start: float = 0.0,
) -> RateCurve:
    """Pooled empirical pair rate at each τ, with binomial standard errors.

    With `consume` off every consecutive different-lead pair within τ counts, which
    estimates `coincidence_rate`. Events before `t_start` are dropped as transient.
    """
    grid = _validated_grid("tau_grid", tau_grid)
    counts = np.zeros(grid.size)
    n_events = 0
    duration = 0.0

    for stream in streams:
        events = _checked_events(stream, t_start)
        n_events += len(events)
        duration += max(stream.t_max - t_start, 0.0)
        for k, tau in enumerate(grid):
            counts[k] += len(_scan_pairs(events, tau, consume=consume))

    if duration <= 0:
        raise exc.ConfigurationError("Empirical rate needs streams longer than t_start")

    trials = max(n_events, 1)
    fraction = np.clip(counts / trials, 0.0, 1.0)
    errors = np.sqrt(trials * fraction * (1 - fraction)) / duration

    return RateCurve(tau_grid=grid, r=counts / duration, r_err=errors)


def event_structure(stream: EventStream, tau: float, *, t_start: float = 0.0) -> EventStructure:
    """Pair count, mean pair-to-pair spacing, B-first fraction and lone-event fraction."""
    events = _checked_events(stream, t_start)
    pairs = _scan_pairs(events, tau, consume=True)

    starts = np.array([pair.t_first for pair in pairs])
    spacing = float(np.mean(np.diff(starts))) if starts.size > 1 else float("nan")
    b_first = sum(pair.first_lead == const.Lead.B for pair in pairs)

    return EventStructure(
        n_events=len(events),
        n_pairs=len(pairs),
        mean_pair_spacing=spacing,
        b_first_fraction=b_first / len(pairs) if pairs else float("nan"),
        lone_fraction=(len(events) - 2 * len(pairs)) / len(events) if events else float("nan"),
    )


def event_structure_check(clean: SystemParams, dirty: SystemParams, seed: int) -> StructureReport:
    """Simulate both regimes for 1e4/gamma_c and judge the clean pair structure.

    Clean streams should show pairs spaced by 2/gamma_c within SPACING_TOL, more than
    B_FIRST_MIN of them B-then-A and fewer than LONE_MAX lone events; dirty streams
    should leave DIRTY_LONE_FACTOR times as many lone events.
    """
    t_max = STRUCTURE_DURATION_OVER_GAMMA_C / clean.gamma_c
    tau = PAIR_WINDOW_OVER_GAMMA_A / clean.gamma_a
    cfg = TrajectoryConfig(t_max=t_max, seed=seed, method=const.TrajectoryMethod.WAITING_TIME)

    clean_structure = event_structure(trajectory.run_trajectory(clean, cfg), tau)
    dirty_structure = event_structure(trajectory.run_trajectory(dirty, cfg), tau)
    spacing = 2 / clean.gamma_c

    report = StructureReport(
        tau=tau,
        t_max=t_max,
        clean=clean_structure,
        dirty=dirty_structure,
        spacing_ok=abs(clean_structure.mean_pair_spacing - spacing) <= SPACING_TOL * spacing,
        b_first_ok=clean_structure.b_first_fraction > B_FIRST_MIN,
        lone_ok=clean_structure.lone_fraction < LONE_MAX,
        dirty_lone_ok=dirty_structure.lone_fraction > DIRTY_LONE_FACTOR * clean_structure.lone_fraction,
    )

    if not report.passed:
        LOGGER.warning(
            "Clean event structure misses its targets: spacing=%.4g, b_first=%.3f, lone=%.3f",
            clean_structure.mean_pair_spacing,
            clean_structure.b_first_fraction,
            clean_structure.lone_fraction,
        )

    return report


def lead_currents(
    p: SystemParams,
    *,
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> dict[const.Lead, float]:
    """Steady emission rates <J_A> and <J_B>."""
    return dict(_context(p, hamiltonian).currents)


def empirical_effective_rate(
    streams: Iterable[EventStream],
    p: SystemParams,
    tau_grid: Sequence[float] | FloatArray,
    *,
    t_start: float = 0.0,
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> RateCurve:
    """Monte Carlo estimate of R(τ): counted coincidences scaled by (Γ_C/2)/(<J_A><J_B>)."""
    currents = lead_currents(p, hamiltonian=hamiltonian)
    if min(currents.values()) <= 0:
        raise exc.ZeroCurrentError(min(currents, key=currents.__getitem__))

    counted = empirical_rate_curve(streams, tau_grid, consume=False, t_start=t_start)
    scale = 0.5 * p.gamma_c / (currents[const.Lead.A] * currents[const.Lead.B])

    return RateCurve(
        tau_grid=counted.tau_grid,
        r=scale * counted.r,  # type: ignore[operator]
        r_err=scale * counted.r_err,  # type: ignore[operator]
    )


__all__ = [
    "BandReport",
    "CorrelationSeries",
    "EventStructure",
    "FidelityDecay",
    "PairRecord",
    "RateCurve",
    "RobustnessReport",
    "SensitivityRow",
    "coincidence_rate",
    "correlation",
    "effective_rate",
    "empirical_effective_rate",
    "empirical_pairs",
    "empirical_rate_curve",
    "event_structure",
    "fidelity",
    "fidelity_decay",
    "first_epoch_state",
    "good_pair_probability",
    "headline_band_check",
    "lead_currents",
    "pair_kernels",
    "rate_curve",
    "regime_tau_star",
    "robustness_check",
    "tau_star",
]
