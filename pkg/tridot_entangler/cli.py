"""Command-line front end of the three-dot entangler simulator."""

from __future__ import annotations

import sys
from logging import getLogger
from pathlib import Path
from typing import TYPE_CHECKING, Final

import numpy as np
from scipy.integrate import trapezoid

from tridot_entangler import hilbert, master, stats, trajectory
from tridot_entangler.models import RunConfig, TrajectoryConfig
from tridot_entangler.utils import (
    CheckResult,
    CsvOutput,
    args,
    const,
    exc,
    format_report,
    to_display_rate,
    to_display_time,
)

if TYPE_CHECKING:
    from argparse import Namespace
    from collections.abc import Callable, Sequence

    from numpy.typing import NDArray

    from tridot_entangler.models import SystemParams

LOGGER = getLogger(__name__)

DEFAULT_PRESETS: Final[dict[str, tuple[str, ...]]] = {
    "scan-suppression": ("suppression",),
    "trajectory": ("clean",),
    "rates": ("clean", "dirty"),
    "steady": ("clean",),
    "validate": ("validation",),
}

TRANSIENT_GAMMA_C_UNITS: Final[float] = 5.0
SIGMA: Final[float] = 3.0


def resolve_seed(seed: int | None) -> int:
    """Return `seed`, or draw one from OS entropy and print it for replay."""
    if seed is not None:
        return seed

    drawn = int(np.random.SeedSequence().entropy) % 2**64  # type: ignore[arg-type]
    print(f"seed={drawn}", file=sys.stderr)
    LOGGER.info("No seed given; drew %i", drawn)

    return drawn


def load_configs(namespace: Namespace) -> list[RunConfig]:
    """Load the config(s) named on the command line, or the subcommand's default presets."""
    overrides = {"n_traj": namespace.n_traj}

    if namespace.config is not None:
        return [RunConfig.from_file(namespace.config, **overrides)]

    presets = (namespace.preset,) if namespace.preset else DEFAULT_PRESETS[namespace.command]
    return [RunConfig.from_preset(name, **overrides) for name in presets]


def cmd_scan_suppression(cfg: RunConfig, out: Path | None) -> int:
    """Write the average |011> population over the (delta, g) grid as `delta,g,p011_avg`."""
    rows = master.suppression_scan(
        cfg.system_params(),
        cfg.delta_grid().tolist(),
        cfg.g_grid,
        relative=cfg.delta_relative,
    )

    with CsvOutput(out, ("delta", "g", "p011_avg")) as fout:
        fout.writerows((float(r.delta), float(r.g), r.p011_avg) for r in rows)

    return const.ExitCode.OK


def cmd_trajectory(
    cfg: RunConfig,
    seed: int,
    out: Path | None,
    units: const.Units = const.Units.NATURAL,
) -> int:
    """Write one event stream as `time,lead` (or `time,lead,kind` with lead-C fills)."""
    stream = trajectory.run_trajectory(cfg.system_params(), cfg.trajectory_config(seed))

    with_kind = cfg.record_c_events
    header = ("time", "lead", "kind") if with_kind else ("time", "lead")

    with CsvOutput(out, header) as fout:
        for row in stream.csv_rows(with_kind=with_kind):
            fout.writerow((to_display_time(row[0], units), *row[1:]))

    return const.ExitCode.OK


def _regime_path(out: Path | None, label: str, suffix: str = "") -> Path:
    return (out or Path("rates")) / f"{label}{suffix}.csv"


def cmd_rates(
    configs: Sequence[RunConfig],
    seed: int | None,
    out: Path | None,
    units: const.Units = const.Units.NATURAL,
) -> int:
    """Write R(τ), P(τ), F(τ) and the correlators per regime, plus empirical overlays.

    With both a clean and a dirty regime the headline band, fidelity decay,
    unmatched-coupling and event-structure checks are reported on stderr.
    """
    params: dict[str, SystemParams] = {}

    for cfg in configs:
        p = cfg.system_params()
        params[cfg.label] = p
        tau = cfg.tau_grid()

        curve = stats.rate_curve(p, tau, hamiltonian=cfg.hamiltonian)
        with CsvOutput(
            _regime_path(out, cfg.label),
            ("tau", "rate", "rate_err", "p_good", "fidelity"),
        ) as fout:
            for k, t in enumerate(tau):
                fout.writerow(
                    (
                        to_display_time(float(t), units),
                        float(curve.r[k]),  # type: ignore[index]
                        0.0,
                        float(curve.p_good[k]),  # type: ignore[index]
                        float(curve.f[k]),  # type: ignore[index]
                    ),
                )

        series = stats.correlation(p, tau, hamiltonian=cfg.hamiltonian)
        with CsvOutput(
            _regime_path(out, cfg.label, "_correlation"),
            ("delta", "c_ab", "c_ba"),
        ) as fout:
            fout.writerows(
                (to_display_time(float(d), units), float(ab), float(ba))
                for d, ab, ba in zip(series.delta_grid, series.c_ab, series.c_ba, strict=True)
            )

        if cfg.n_traj > 0:
            ensemble = trajectory.run_ensemble(
                p,
                cfg.trajectory_config(resolve_seed(seed if seed is not None else cfg.seed)),
                cfg.n_traj,
                workers=cfg.workers,
            )
            empirical = stats.empirical_effective_rate(
                ensemble.streams,
                p,
                tau,
                t_start=min(TRANSIENT_GAMMA_C_UNITS / p.gamma_c, 0.25 * cfg.t_max),
                hamiltonian=cfg.hamiltonian,
            )
            with CsvOutput(
                _regime_path(out, cfg.label, "_empirical"),
                ("tau", "rate", "rate_err", "p_good", "fidelity"),
            ) as fout:
                for k, t in enumerate(tau):
                    fout.writerow(
                        (
                            to_display_time(float(t), units),
                            float(empirical.r[k]),  # type: ignore[index]
                            float(empirical.r_err[k]),  # type: ignore[index]
                            float(curve.p_good[k]),  # type: ignore[index]
                            float(curve.f[k]),  # type: ignore[index]
                        ),
                    )

    if {"clean", "dirty"} <= params.keys():
        clean_cfg = next(c for c in configs if c.label == "clean")
        checks = headline_checks(
            params["clean"],
            params["dirty"],
            clean_cfg.tau_grid(),
            resolve_seed(seed if seed is not None else clean_cfg.seed),
        )
        print(format_report(checks), file=sys.stderr)

    return const.ExitCode.OK


def headline_checks(
    clean: SystemParams,
    dirty: SystemParams,
    tau_grid: NDArray[np.float64],
    seed: int,
) -> list[CheckResult]:
    """Band check, fidelity decay, unmatched-coupling robustness and event structure as report rows."""
    band = stats.headline_band_check(clean, dirty, tau_grid)
    sensitivity = "; ".join(
        f"{row.parameter}x{row.factor:g}: ratio={row.rate_ratio:.3f}"
        f" F_c={row.f_clean:.3f} F_d={row.f_dirty:.3f}"
        for row in band.sensitivity
    )
    results = [
        CheckResult(
            "headline band",
            band.found,
            f"tau={band.tau:.4g} (tau*={band.tau_star:.4g}) R_d/R_c={band.rate_ratio:.3f}"
            f" F_clean={band.f_clean:.3f} F_dirty={band.f_dirty:.3f}"
            + ("" if band.found else f" | sensitivity {sensitivity}"),
        ),
    ]

    for label, p in (("clean", clean), ("dirty", dirty)):
        decay = stats.fidelity_decay(p, tau_grid)
        results.append(
            CheckResult(
                f"fidelity decay {label}",
                decay.dropped,
                f"F(tau*={decay.tau_star:.4g})={decay.f_tau_star:.3f}"
                f" F(2/gamma_c)={decay.f_late:.3f}",
            ),
        )

    robust = stats.robustness_check(clean, dirty, tau_grid)
    results.append(
        CheckResult(
            "unmatched couplings",
            robust.holds,
            f"g_cb={robust.g_cb_ratio:g}g F_clean={robust.f_clean:.3f} F_dirty={robust.f_dirty:.3f}",
        ),
    )

    structure = stats.event_structure_check(clean, dirty, seed=seed)
    results.append(
        CheckResult(
            "event structure",
            structure.passed,
            f"t_max={structure.t_max:g} tau={structure.tau:g}"
            f" spacing={structure.clean.mean_pair_spacing:.4g} (target {2 / clean.gamma_c:.4g})"
            f" b_first={structure.clean.b_first_fraction:.3f}"
            f" lone={structure.clean.lone_fraction:.3f} dirty_lone={structure.dirty.lone_fraction:.3f}",
        ),
    )

    return results


def cmd_steady(
    cfg: RunConfig,
    out: Path | None,
    units: const.Units = const.Units.NATURAL,
) -> int:
    """Write the steady-state charge populations as `n_a,n_b,n_c,population`."""
    p = cfg.system_params()
    rho = master.steady_state(master.liouvillian(p, cfg.hamiltonian))

    LOGGER.info(
        "Steady currents: in=%.6g, out=%.6g (%s)",
        to_display_rate(master.input_current(p, rho), units),
        to_display_rate(master.output_current(p, rho), units),
        units,
    )

    populations = np.real(np.diag(rho))
    with CsvOutput(out, ("n_a", "n_b", "n_c", "population")) as fout:
        fout.writerows((*s, float(populations[i])) for i, s in enumerate(hilbert.BASIS))

    return const.ExitCode.OK


def _check(name: str, func: Callable[[], tuple[bool, str]]) -> CheckResult:
    try:
        passed, detail = func()
    except exc.EntanglerError as err:
        return CheckResult(name, passed=False, detail=f"{type(err).__name__}: {err}")

    return CheckResult(name, passed, detail)


def _vacuum() -> master.DensityMatrix:
    rho = np.zeros((const.DIM, const.DIM), dtype=np.complex128)
    rho[hilbert.VACUUM, hilbert.VACUUM] = 1.0
    return rho


def validation_checks(cfg: RunConfig, seed: int) -> list[CheckResult]:  # noqa: PLR0915
    """Run the invariant suite against one configuration."""
    p = cfg.system_params()
    generator = master.liouvillian(p, cfg.hamiltonian)
    t_grid = cfg.t_grid()
    n_traj = max(cfg.n_traj, 1)

    def trace_and_positivity() -> tuple[bool, str]:
        trace_error = 0.0
        hermitian_error = 0.0
        min_eig = np.inf
        for t in t_grid:
            rho = master.evolve(_vacuum(), generator, float(t))
            trace_error = max(trace_error, abs(np.trace(rho) - 1))
            hermitian_error = max(hermitian_error, float(np.max(np.abs(rho - rho.conj().T))))
            min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)))))
        return (
            trace_error < const.TRACE_ATOL
            and hermitian_error < const.HERMITIAN_ATOL
            and min_eig >= -const.POSITIVITY_ATOL,
            f"max |Tr-1|={trace_error:.2e}, max |rho-rho^H|={hermitian_error:.2e},"
            f" min eigenvalue={min_eig:.2e}",
        )

    def steady_residual() -> tuple[bool, str]:
        rho = master.steady_state(generator)
        residual = float(np.linalg.norm(generator.matrix @ master.vec(rho)))
        scale = max(1.0, generator.norm)
        return residual < 1e-10 * scale, f"||L rho_ss||={residual:.2e} (||L||={scale:.3g})"

    def current_conservation() -> tuple[bool, str]:
        rho = master.steady_state(generator)
        i_in, i_out = master.input_current(p, rho), master.output_current(p, rho)
        rel = abs(i_in - i_out) / i_out
        return rel < 1e-9, f"in={i_in:.6g} out={i_out:.6g} rel={rel:.2e}"

    def no_transport_at_zero_g() -> tuple[bool, str]:
        zero_g = p.model_copy(update={"g": 0.0, "g_cb": 0.0})
        try:
            master.steady_state(master.liouvillian(zero_g, cfg.hamiltonian))
        except exc.SteadyStateError as err:
            return True, f"{type(err).__name__}: {err}"
        return False, "g=0 produced a transporting steady state"

    def step_guard() -> tuple[bool, str]:
        coarse = TrajectoryConfig(t_max=1.0, dt=1.0, seed=seed, method=const.TrajectoryMethod.EULER)
        try:
            trajectory.run_trajectory(p, coarse)
        except exc.StepSizeGuardError as err:
            return True, str(err)
        return False, "dt=1 was accepted"

    def unravelling() -> tuple[bool, str]:
        exact = np.array(
            [
                [
                    float(np.real(np.trace(n @ master.evolve(_vacuum(), generator, float(t)))))
                    for n in hilbert.number_ops()
                ]
                for t in t_grid
            ],
        )
        tables = {
            method: trajectory.ensemble_populations(
                p,
                cfg.trajectory_config(seed).model_copy(
                    update={"method": method, "t_max": float(t_grid[-1])},
                ),
                n_traj,
                t_grid,
                workers=cfg.workers,
            )
            for method in const.TrajectoryMethod
        }
        worst = 0.0
        for table in tables.values():
            z = np.abs(table.mean - exact) / np.maximum(table.stderr, 1e-12)
            worst = max(worst, float(np.max(np.where(np.abs(table.mean - exact) < 1e-12, 0, z))))
        euler, wt = tables[const.TrajectoryMethod.EULER], tables[const.TrajectoryMethod.WAITING_TIME]
        diff = np.abs(euler.mean - wt.mean)
        z_mc = diff / np.maximum(np.hypot(euler.stderr, wt.stderr), 1e-12)
        worst = max(worst, float(np.max(np.where(diff < 1e-12, 0, z_mc))))
        return worst <= SIGMA, f"worst deviation {worst:.2f} sigma over {n_traj} trajectories"

    def event_counts() -> tuple[bool, str]:
        t_end = float(t_grid[-1])
        times = np.linspace(0.0, t_end, 401)
        rho = _vacuum()
        n_a, n_b, _ = hilbert.number_ops()
        flux = np.zeros((times.size, 2))
        for k, t in enumerate(times):
            if k:
                rho = master.evolve(rho, generator, float(t - times[k - 1]))
            flux[k] = (
                p.gamma_a * np.real(np.trace(n_a @ rho)),
                p.gamma_b * np.real(np.trace(n_b @ rho)),
            )
        expected = trapezoid(flux, times, axis=0)
        table = trajectory.run_ensemble(
            p,
            cfg.trajectory_config(seed).model_copy(update={"t_max": t_end}),
            n_traj,
            workers=cfg.workers,
        )
        counts = np.array([[s.count(const.Lead.A), s.count(const.Lead.B)] for s in table.streams])
        se = counts.std(axis=0, ddof=1) / np.sqrt(len(counts)) if len(counts) > 1 else np.ones(2)
        z = np.abs(counts.mean(axis=0) - expected) / np.maximum(se, 1e-12)
        return (
            bool(np.all(z <= SIGMA)),
            f"mean A/B counts {counts.mean(axis=0).round(4).tolist()} vs "
            f"{expected.round(4).tolist()} ({float(z.max()):.2f} sigma)",
        )

    def rate_cross_check() -> tuple[bool, str]:
        long_cfg = TrajectoryConfig(
            t_max=max(cfg.t_max, 1000.0 / p.max_rate),
            seed=seed,
            method=const.TrajectoryMethod.WAITING_TIME,
            hamiltonian=cfg.hamiltonian,
        )
        taus = np.array([0.5, 1.0, 2.0, 4.0]) / p.gamma_a
        streams = trajectory.run_ensemble(p, long_cfg, 20, workers=cfg.workers).streams
        empirical = stats.empirical_rate_curve(
            streams,
            taus,
            consume=False,
            t_start=10.0 / min(p.gamma_a, p.gamma_b, p.gamma_c),
        )
        analytic = stats.coincidence_rate(p, taus, hamiltonian=cfg.hamiltonian)
        z = np.abs(empirical.r - analytic.r) / np.maximum(empirical.r_err, 1e-12)  # type: ignore[operator]
        return bool(np.all(z <= SIGMA)), f"worst deviation {float(z.max()):.2f} sigma"

    def probability_bounds() -> tuple[bool, str]:
        tau = cfg.tau_grid()
        curve = stats.good_pair_probability(p, tau, hamiltonian=cfg.hamiltonian)
        p_kernel, q_kernel = stats.pair_kernels(p, tau, hamiltonian=cfg.hamiltonian)
        slack = 1e-10 * max(float(np.max(q_kernel)), 1.0)
        ok = (
            bool(np.all((curve.p_good >= 0) & (curve.p_good <= 1)))  # type: ignore[operator]
            and np.allclose(curve.f, (1 + 3 * curve.p_good) / 4)  # type: ignore[operator]
            and bool(np.all(p_kernel <= q_kernel + slack))
            and float(min(p_kernel.min(), q_kernel.min())) >= -slack
        )
        return ok, (
            f"P in [{curve.p_good.min():.4f}, {curve.p_good.max():.4f}],"  # type: ignore[union-attr]
            f" max p-q={float(np.max(p_kernel - q_kernel)):.2e}"
        )

    def seed_determinism() -> tuple[bool, str]:
        tcfg = cfg.trajectory_config(seed)
        first = trajectory.run_trajectory(p, tcfg).csv_rows()
        second = trajectory.run_trajectory(p, tcfg).csv_rows()
        return first == second, f"{len(first)} events replayed"

    return [
        _check("trace and positivity", trace_and_positivity),
        _check("steady-state residual", steady_residual),
        _check("current conservation", current_conservation),
        _check("no transport at g=0", no_transport_at_zero_g),
        _check("euler step guard", step_guard),
        _check("unravelling consistency", unravelling),
        _check("mean event counts", event_counts),
        _check("coincidence rate", rate_cross_check),
        _check("pair probability bounds", probability_bounds),
        _check("seed determinism", seed_determinism),
    ]


def cmd_validate(cfg: RunConfig, seed: int) -> int:
    """Print pass/fail per invariant check; exit 1 if any fails."""
    results = validation_checks(cfg, seed)
    print(format_report(results), file=sys.stderr)

    if all(r.passed for r in results):
        return const.ExitCode.OK

    return const.ExitCode.INVARIANT_FAILURE


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point of the `tridot` command."""
    namespace = args.parse_arguments(argv)

    try:
        configs = load_configs(namespace)
        cfg = configs[0]

        match namespace.command:
            case "scan-suppression":
                return cmd_scan_suppression(cfg, namespace.out)
            case "trajectory":
                seed = resolve_seed(namespace.seed if namespace.seed is not None else cfg.seed)
                return cmd_trajectory(cfg, seed, namespace.out, namespace.units)
            case "rates":
                return cmd_rates(configs, namespace.seed, namespace.out, namespace.units)
            case "steady":
                return cmd_steady(cfg, namespace.out, namespace.units)
            case _:
                seed = namespace.seed if namespace.seed is not None else (cfg.seed or 0)
                return cmd_validate(cfg, seed)
    except exc.EntanglerError as err:
        LOGGER.error("%s: %s", type(err).__name__, err)  # noqa: TRY400
        print(f"error: {err}", file=sys.stderr)
        return err.EXIT_CODE


if __name__ == "__main__":
    sys.exit(main())
