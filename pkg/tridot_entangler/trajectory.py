"""Quantum-jump unravellings of the cluster master equation.

Two methods are available:

- `euler`: fixed-step sampling of the A/B emissions only, with the source lead kept as
  a continuous term. Each step draws one uniform number per drain and fires a jump when
  it falls below Tr{J_i rho} dt; between jumps the conditioned density matrix follows
  the no-jump propagator and is renormalised.
- `waiting_time`: every dissipator is a jump. A pure 12-dim state evolves under the
  non-Hermitian H_eff until its norm drops to a uniform draw, then a channel is chosen
  in proportion to Gamma_k ||L_k psi||^2. Only A/B jumps are emitted as events.

Each trajectory owns an independent PCG64 stream derived from (seed, trajectory index),
so results do not depend on batching or on how many workers run them.
"""

from __future__ import annotations

from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from logging import getLogger
from math import isfinite
from typing import TYPE_CHECKING, Final

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import eig, expm
from scipy.optimize import brentq

from tridot_entangler import hilbert, master
from tridot_entangler.utils import const, exc

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from tridot_entangler.models import SystemParams, TrajectoryConfig

LOGGER = getLogger(__name__)

EULER_BATCH: Final[int] = 256
EULER_CHUNK: Final[int] = 1024
EIG_COND_LIMIT: Final[float] = 1e8


@dataclass(frozen=True)
class EventRecord:
    """An electron leaving the cluster into lead A or B."""

    time: float
    lead: const.Lead


@dataclass(frozen=True)
class EventStream:
    """Time-ordered emissions of one trajectory, plus optional lead-C fill times."""

    events: tuple[EventRecord, ...]
    t_max: float
    seed: int = 0
    index: int = 0
    fills: tuple[float, ...] = ()

    @cached_property
    def times(self) -> NDArray[np.float64]:
        """Event times as an array."""
        return np.array([e.time for e in self.events], dtype=np.float64)

    @cached_property
    def leads(self) -> tuple[const.Lead, ...]:
        """Event leads in order."""
        return tuple(e.lead for e in self.events)

    def count(self, lead: const.Lead) -> int:
        """Number of emissions into `lead`."""
        return sum(1 for e in self.events if e.lead == lead)

    def csv_rows(self, *, with_kind: bool = False) -> list[tuple[float, str] | tuple[float, str, str]]:
        """Rows for `time,lead` output, or `time,lead,kind` with lead-C fills merged in."""
        if not with_kind:
            return [(e.time, str(e.lead)) for e in self.events]

        rows: list[tuple[float, str, str]] = [
            (e.time, str(e.lead), const.EventKind.EMIT) for e in self.events
        ]
        rows.extend((t, "C", const.EventKind.FILL) for t in self.fills)
        rows.sort(key=lambda row: row[0])

        return rows  # type: ignore[return-value]


@dataclass(frozen=True)
class PopulationTable:
    """Ensemble-averaged dot occupations with standard errors."""

    t_grid: NDArray[np.float64]
    mean: NDArray[np.float64]
    stderr: NDArray[np.float64]
    n_traj: int
    streams: tuple[EventStream, ...] = field(default=(), repr=False)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for trajectory `index` of a seeded ensemble."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def check_step_guard(p: SystemParams, cfg: TrajectoryConfig) -> float:
    """Validate the Euler step against the fastest rate and ||H||, returning dt."""
    dt = cfg.resolved_dt(p)
    h_norm = float(np.linalg.norm(hilbert.build_hamiltonian(p, cfg.hamiltonian), 2))
    scale = max(p.max_rate, h_norm)

    if dt * scale > const.EULER_STEP_GUARD:
        raise exc.StepSizeGuardError(dt, scale, const.EULER_STEP_GUARD)

    return dt


def _grid_positions(
    t_grid: NDArray[np.float64] | None,
    t_max: float,
) -> NDArray[np.float64]:
    if t_grid is None:
        return np.empty(0)

    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.size and (np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0 or t_grid[-1] > t_max):
        raise exc.InvalidGridError("t_grid", "must be increasing within [0, t_max]")

    return t_grid


def _run_euler_batch(
    p: SystemParams,
    cfg: TrajectoryConfig,
    indices: Sequence[int],
    t_grid: NDArray[np.float64],
) -> tuple[list[EventStream], NDArray[np.float64]]:
    """Advance a batch of Euler-mode trajectories in lock-step."""
    dt = check_step_guard(p, cfg)

    if cfg.record_c_events:
        LOGGER.warning("Lead C is a continuous term in euler mode; no fill events are recorded")

    n_steps = round(cfg.t_max / dt)
    step = expm(master.exclusive_liouvillian(p, cfg.hamiltonian).matrix * dt).T
    jumps = (
        master.jump_superoperator(p, const.Lead.A).T,
        master.jump_superoperator(p, const.Lead.B).T,
    )
    leads = (const.Lead.A, const.Lead.B)

    n_ops = hilbert.number_ops()
    number_rows = np.stack([master.expectation_row(n) for n in n_ops]).T
    emission_rows = np.stack(
        [p.gamma_a * master.expectation_row(n_ops[0]), p.gamma_b * master.expectation_row(n_ops[1])],
    ).T
    trace_col = master.trace_row()

    grid_at_step: defaultdict[int, list[int]] = defaultdict(list)
    for pos, t in enumerate(t_grid):
        grid_at_step[min(round(t / dt), n_steps)].append(pos)

    n_batch = len(indices)
    vacuum = np.zeros((const.DIM, const.DIM), dtype=np.complex128)
    vacuum[hilbert.VACUUM, hilbert.VACUUM] = 1.0
    states = np.tile(master.vec(vacuum), (n_batch, 1))

    rngs = [trajectory_rng(cfg.seed, i) for i in indices]
    events: list[list[EventRecord]] = [[] for _ in indices]
    populations = np.zeros((n_batch, len(t_grid), 3))
    rows = np.arange(n_batch)

    def record(k: int) -> None:
        for pos in grid_at_step.get(k, ()):
            populations[:, pos, :] = np.real(states @ number_rows)

    for start in range(0, n_steps, EULER_CHUNK):
        m = min(EULER_CHUNK, n_steps - start)
        draws = np.stack([rng.random((m, 2)) for rng in rngs], axis=1)

        for k in range(m):
            record(start + k)

            probabilities = dt * np.real(states @ emission_rows)
            fire = draws[k] < probabilities
            jumped = fire.any(axis=1)

            new_states = states @ step
            if jumped.any():
                # At most one jump per step; the draw furthest below threshold wins
                ratio = np.where(fire, draws[k] / np.maximum(probabilities, 1e-300), np.inf)
                which = np.argmin(ratio, axis=1)
                t_event = (start + k + 1) * dt

                for lead_idx, jump in enumerate(jumps):
                    selected = rows[jumped & (which == lead_idx)]
                    if selected.size:
                        new_states[selected] = states[selected] @ jump
                        for b in selected:
                            events[b].append(EventRecord(t_event, leads[lead_idx]))

            traces = np.real(new_states @ trace_col)
            # Jump rows carry Tr{J_i rho}, which is not bounded by 1
            if np.any(traces <= 0) or np.any(traces[~jumped] > 1 + const.PROBABILITY_SLACK):
                raise exc.NumericalError(f"Conditioned trace left (0, 1]: {traces.min():.3e}")

            states = new_states / traces[:, None]

    record(n_steps)

    streams = [
        EventStream(events=tuple(ev), t_max=cfg.t_max, seed=cfg.seed, index=i)
        for i, ev in zip(indices, events, strict=True)
    ]

    return streams, populations


class NoJumpPropagator:
    """Evaluate exp(-i H_eff t) psi, via eigen-decomposition when well conditioned."""

    def __init__(self, h_eff: hilbert.OperatorMatrix) -> None:
        """Diagonalise H_eff once, falling back to expm when the eigenbasis is ill conditioned."""
        self._h_eff = h_eff
        energies, vectors = eig(h_eff)
        self._use_eig = bool(np.linalg.cond(vectors) < EIG_COND_LIMIT)

        if self._use_eig:
            self._energies = energies
            self._vectors = vectors
            self._inverse = np.linalg.inv(vectors)
        else:
            LOGGER.debug("H_eff eigenbasis ill conditioned; using expm propagation")

    def segment(
        self,
        psi: NDArray[np.complex128],
    ) -> Callable[[float], NDArray[np.complex128]]:
        """Return t -> exp(-i H_eff t) psi for a fixed starting state."""
        if self._use_eig:
            coefficients = self._inverse @ psi
            return lambda t: self._vectors @ (np.exp(-1j * self._energies * t) * coefficients)

        return lambda t: expm(-1j * self._h_eff * t) @ psi


def _norm2(psi: NDArray[np.complex128]) -> float:
    return float(np.real(np.vdot(psi, psi)))


def _survival(
    evaluate: Callable[[float], NDArray[np.complex128]],
) -> Callable[[float], float]:
    return lambda s: _norm2(evaluate(s))


def _waiting_time(
    survival: Callable[[float], float],
    threshold: float,
    remaining: float,
    first_step: float,
) -> float | None:
    """Solve survival(s) = threshold on [0, remaining]; None when no jump occurs in time."""
    if survival(remaining) > threshold:
        return None

    lo, hi = 0.0, min(first_step, remaining)
    while survival(hi) > threshold:
        lo, hi = hi, min(2 * hi, remaining)

    return float(brentq(lambda s: survival(s) - threshold, lo, hi, xtol=1e-13, rtol=1e-12))


def _run_waiting_time(
    p: SystemParams,
    cfg: TrajectoryConfig,
    index: int,
    t_grid: NDArray[np.float64],
) -> tuple[EventStream, NDArray[np.float64]]:
    """Generate one trajectory with every dissipator treated as a jump."""
    rng = trajectory_rng(cfg.seed, index)
    h = hilbert.build_hamiltonian(p, cfg.hamiltonian)
    channels = hilbert.build_jump_operators(p)

    h_eff = h - 0.5j * sum(
        (c.rate * c.operator.conj().T @ c.operator for c in channels),
        start=np.zeros_like(h),
    )
    propagator = NoJumpPropagator(h_eff)
    total_rate = sum(c.rate for c in channels)
    first_step = 1.0 / total_rate if total_rate > 0 else cfg.t_max

    n_diag = np.stack([np.real(np.diag(n)) for n in hilbert.number_ops()], axis=1)
    populations = np.zeros((len(t_grid), 3))
    grid_next = 0

    psi = np.zeros(const.DIM, dtype=np.complex128)
    psi[hilbert.VACUUM] = 1.0
    t = 0.0
    events: list[EventRecord] = []
    fills: list[float] = []

    def record(upto: float, evaluate: Callable[[float], NDArray[np.complex128]], *, closed: bool) -> None:
        nonlocal grid_next
        while grid_next < len(t_grid) and (
            t_grid[grid_next] < upto or (closed and t_grid[grid_next] <= upto)
        ):
            phi = evaluate(t_grid[grid_next] - t)
            populations[grid_next] = (np.abs(phi) ** 2 @ n_diag) / _norm2(phi)
            grid_next += 1

    while True:
        evaluate = propagator.segment(psi)
        remaining = cfg.t_max - t
        tau = _waiting_time(_survival(evaluate), rng.random(), remaining, first_step)

        if tau is None:
            record(cfg.t_max, evaluate, closed=True)
            break

        record(t + tau, evaluate, closed=False)

        phi = evaluate(tau)
        t_jump = t + tau
        if events and t_jump <= events[-1].time:
            t_jump = float(np.nextafter(events[-1].time, np.inf))
        t = t_jump

        weights = np.array([c.rate * _norm2(c.operator @ phi) for c in channels])
        if not isfinite(weights.sum()) or weights.sum() <= 0:
            raise exc.NumericalError(f"No jump channel available at t={t:g}")

        k = int(np.searchsorted(np.cumsum(weights), rng.random() * weights.sum(), side="right"))
        k = min(k, len(channels) - 1)
        jumped = channels[k].operator @ phi
        psi = jumped / np.sqrt(_norm2(jumped))

        if channels[k].name in (const.Lead.A, const.Lead.B):
            events.append(EventRecord(t, const.Lead(channels[k].name)))
        elif cfg.record_c_events and channels[k].name.startswith("fill"):
            fills.append(t)

    stream = EventStream(
        events=tuple(events),
        t_max=cfg.t_max,
        seed=cfg.seed,
        index=index,
        fills=tuple(fills),
    )

    return stream, populations


def _run_batch(
    p: SystemParams,
    cfg: TrajectoryConfig,
    indices: Sequence[int],
    t_grid: NDArray[np.float64],
) -> tuple[list[EventStream], NDArray[np.float64]]:
    if cfg.method == const.TrajectoryMethod.EULER:
        return _run_euler_batch(p, cfg, indices, t_grid)

    streams: list[EventStream] = []
    populations = np.zeros((len(indices), len(t_grid), 3))
    for row, index in enumerate(indices):
        stream, populations[row] = _run_waiting_time(p, cfg, index, t_grid)
        streams.append(stream)

    return streams, populations


def run_trajectory(p: SystemParams, cfg: TrajectoryConfig) -> EventStream:
    """Generate the event stream of trajectory 0 for this seed.

    Raises:
        StepSizeGuardError: in euler mode, when dt is too coarse
    """
    if cfg.method == const.TrajectoryMethod.EULER:
        check_step_guard(p, cfg)

    streams, _ = _run_batch(p, cfg, [0], np.empty(0))
    LOGGER.info(
        "Trajectory seed=%i: %i A and %i B events over t_max=%g",
        cfg.seed,
        streams[0].count(const.Lead.A),
        streams[0].count(const.Lead.B),
        cfg.t_max,
    )
    return streams[0]


def run_ensemble(
    p: SystemParams,
    cfg: TrajectoryConfig,
    n_traj: int,
    t_grid: Sequence[float] | NDArray[np.float64] | None = None,
    *,
    workers: int = 1,
) -> PopulationTable:
    """Run `n_traj` trajectories and keep both their streams and sampled occupations."""
    if n_traj < 1:
        raise exc.ConfigurationError("n_traj must be at least 1")

    if cfg.method == const.TrajectoryMethod.EULER:
        check_step_guard(p, cfg)

    grid = _grid_positions(None if t_grid is None else np.asarray(t_grid), cfg.t_max)
    batch = EULER_BATCH if cfg.method == const.TrajectoryMethod.EULER else 64
    batches = [list(range(s, min(s + batch, n_traj))) for s in range(0, n_traj, batch)]

    if workers > 1 and len(batches) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    _run_batch,
                    [p] * len(batches),
                    [cfg] * len(batches),
                    batches,
                    [grid] * len(batches),
                ),
            )
    else:
        results = [_run_batch(p, cfg, indices, grid) for indices in batches]

    streams = tuple(s for batch_streams, _ in results for s in batch_streams)
    samples = np.concatenate([pops for _, pops in results], axis=0)

    mean = samples.mean(axis=0)
    stderr = (
        samples.std(axis=0, ddof=1) / np.sqrt(n_traj) if n_traj > 1 else np.zeros_like(mean)
    )

    return PopulationTable(t_grid=grid, mean=mean, stderr=stderr, n_traj=n_traj, streams=streams)


def ensemble_populations(
    p: SystemParams,
    cfg: TrajectoryConfig,
    n_traj: int,
    t_grid: Sequence[float] | NDArray[np.float64],
    *,
    workers: int = 1,
) -> PopulationTable:
    """Ensemble-averaged <n_A>, <n_B>, <n_C> at each grid time, with standard errors."""
    table = run_ensemble(p, cfg, n_traj, t_grid, workers=workers)
    return PopulationTable(
        t_grid=table.t_grid,
        mean=table.mean,
        stderr=table.stderr,
        n_traj=table.n_traj,
    )


__all__ = [
    "EventRecord",
    "EventStream",
    "NoJumpPropagator",
    "PopulationTable",
    "check_step_guard",
    "ensemble_populations",
    "run_ensemble",
    "run_trajectory",
    "trajectory_rng",
]
