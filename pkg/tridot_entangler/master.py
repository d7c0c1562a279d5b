"""Deterministic open-system solvers for the three-dot cluster.

Density matrices are vectorised by column stacking, so that
vec(A X B) = (B^T kron A) vec(X) and Tr(A X) = vec(A^T) . vec(X).
"""

from __future__ import annotations

from dataclasses import dataclass
from logging import getLogger
from math import ceil
from typing import TYPE_CHECKING, Final, Literal, NamedTuple

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import solve_ivp, trapezoid
from scipy.linalg import eigh, expm, svd

from tridot_entangler import hilbert
from tridot_entangler.utils import const, exc

if TYPE_CHECKING:
    from collections.abc import Sequence

    from tridot_entangler.models import SystemParams

LOGGER = getLogger(__name__)

DensityMatrix = NDArray[np.complex128]
SuperMatrix = NDArray[np.complex128]

_EYE: Final[NDArray[np.complex128]] = np.eye(const.DIM, dtype=np.complex128)


@dataclass(frozen=True)
class Superoperator:
    """A 144 x 144 generator acting on column-stacked density matrices."""

    matrix: SuperMatrix
    kind: const.SuperoperatorKind
    params: SystemParams

    @property
    def norm(self) -> float:
        """Spectral norm of the generator."""
        return float(np.linalg.norm(self.matrix, 2))


def vec(rho: DensityMatrix) -> NDArray[np.complex128]:
    """Column-stack a density matrix."""
    return np.asarray(rho, dtype=np.complex128).reshape(-1, order="F")


def unvec(v: NDArray[np.complex128]) -> DensityMatrix:
    """Inverse of `vec`."""
    return np.asarray(v, dtype=np.complex128).reshape(const.DIM, const.DIM, order="F")


def spre(a: hilbert.OperatorMatrix) -> SuperMatrix:
    """Superoperator of left multiplication, X -> A X."""
    return np.kron(_EYE, a)


def spost(b: hilbert.OperatorMatrix) -> SuperMatrix:
    """Superoperator of right multiplication, X -> X B."""
    return np.kron(b.T, _EYE)


def sandwich(op: hilbert.OperatorMatrix) -> SuperMatrix:
    """Superoperator X -> L X L^dagger."""
    return np.kron(op.conj(), op)


def dissipator(op: hilbert.OperatorMatrix, rate: float) -> SuperMatrix:
    """Lindblad dissipator rate * (L X L^dagger - 1/2 {L^dagger L, X})."""
    ldl = op.conj().T @ op
    return rate * (sandwich(op) - 0.5 * (spre(ldl) + spost(ldl)))


def trace_row() -> NDArray[np.complex128]:
    """Row vector implementing the trace functional."""
    return vec(_EYE)


def expectation_row(op: hilbert.OperatorMatrix) -> NDArray[np.complex128]:
    """Row vector w such that w . vec(rho) = Tr(op rho)."""
    return vec(op.T)


def jump_superoperator(p: SystemParams, lead: const.Lead) -> SuperMatrix:
    """Monitored jump J_i rho = Gamma_i c_i rho c_i^dagger."""
    c_a, c_b, *_ = hilbert.lowering_ops()
    if lead == const.Lead.A:
        return p.gamma_a * sandwich(c_a)

    return p.gamma_b * sandwich(c_b)


def projector_sandwich(projector: hilbert.OperatorMatrix) -> SuperMatrix:
    """Superoperator X -> P X P for a Hermitian projector P."""
    return np.kron(projector.T, projector)


def _assemble(p: SystemParams, choice: const.HamiltonianChoice) -> SuperMatrix:
    h = hilbert.build_hamiltonian(p, choice)
    generator = -1j * (spre(h) - spost(h))

    for jump in hilbert.build_jump_operators(p):
        generator = generator + dissipator(jump.operator, jump.rate)

    return generator


def liouvillian(
    p: SystemParams,
    hamiltonian_choice: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> Superoperator:
    """Full Lindblad generator: coherent commutator plus every lead/dephasing dissipator."""
    return Superoperator(
        matrix=_assemble(p, hamiltonian_choice),
        kind=const.SuperoperatorKind.FULL,
        params=p,
    )


def exclusive_liouvillian(
    p: SystemParams,
    hamiltonian_choice: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE,
) -> Superoperator:
    """Generator of evolution with no A/B emission events.

    The A and B sandwich terms are removed; their anticommutator halves, the source
    fills and dephasing stay, so the trace of the propagated state is the probability
    of no A/B event in the interval.
    """
    matrix = _assemble(p, hamiltonian_choice)
    matrix = matrix - jump_superoperator(p, const.Lead.A) - jump_superoperator(p, const.Lead.B)

    return Superoperator(
        matrix=matrix,
        kind=const.SuperoperatorKind.NO_JUMP_AB,
        params=p,
    )


def _check_finite(name: str, value: NDArray[np.complex128] | float) -> None:
    if not np.all(np.isfinite(value)):
        raise exc.NonFiniteInputError(name)


def evolve(
    rho0: DensityMatrix,
    generator: Superoperator,
    t: float,
    *,
    method: Literal["expm", "rk"] = "expm",
) -> DensityMatrix:
    """Propagate a density matrix for time `t`.

    Args:
        rho0 (DensityMatrix): initial state
        generator (Superoperator): generator to exponentiate
        t (float): duration, must be non-negative
        method (str): "expm" for the dense scaling-and-squaring exponential, "rk" for
            the adaptive Runge-Kutta cross-check

    Returns:
        DensityMatrix: the propagated (not renormalised) state
    """
    _check_finite("rho0", rho0)
    _check_finite("t", t)
    _check_finite("generator", generator.matrix)

    if t < 0:
        raise exc.NegativeDurationError(t)

    if t == 0:
        return np.array(rho0, dtype=np.complex128)

    if method == "expm":
        return unvec(expm(generator.matrix * t) @ vec(rho0))

    solution = solve_ivp(
        lambda _, y: generator.matrix @ y,
        (0.0, t),
        vec(rho0),
        method="DOP853",
        rtol=1e-10,
        atol=1e-12,
    )

    if not solution.success:
        raise exc.IntegrationError(solution.message)

    return unvec(solution.y[:, -1])


def stationary_basis(
    generator: Superoperator,
    *,
    rtol: float = const.NULLSPACE_RTOL,
) -> list[DensityMatrix]:
    """Return a basis of the generator's nullspace as 12 x 12 matrices."""
    _, singular_values, vh = svd(generator.matrix)
    tol = max(1e-14, rtol * singular_values[0])
    dimension = int(np.sum(singular_values <= tol))

    LOGGER.debug(
        "Smallest singular values: %s (tolerance %.3e)",
        singular_values[-3:],
        tol,
    )

    if dimension == 0:
        # Roundoff can lift the exact zero just above tolerance
        dimension = 1

    return [unvec(row.conj()) for row in vh[-dimension:]]


def output_current(p: SystemParams, rho: DensityMatrix) -> float:
    """Emission current Gamma_A <n_A> + Gamma_B <n_B>."""
    n_a, n_b, _ = hilbert.number_ops()
    return float(np.real(p.gamma_a * np.trace(n_a @ rho) + p.gamma_b * np.trace(n_b @ rho)))


def input_current(p: SystemParams, rho: DensityMatrix) -> float:
    """Source current Gamma_C (P[n_C = 0] + P[n_C = 1])."""
    populations = np.real(np.diag(rho))
    not_full = sum(populations[i] for i, s in enumerate(hilbert.BASIS) if s.n_c < 2)  # noqa: PLR2004
    return float(p.gamma_c * not_full)


def steady_state(generator: Superoperator) -> DensityMatrix:
    """Unique stationary state of a full Liouvillian.

    Raises:
        DegenerateSteadyStateError: if the nullspace is more than one-dimensional
        NoTransportError: if the unique stationary state carries no current
    """
    basis = stationary_basis(generator)
    if len(basis) > 1:
        raise exc.DegenerateSteadyStateError(len(basis))

    # Dividing by the trace first removes the arbitrary SVD phase
    rho = basis[0] / np.trace(basis[0])
    rho = 0.5 * (rho + rho.conj().T)

    current = output_current(generator.params, rho)
    if current <= 1e-12 * max(generator.params.max_rate, 1e-300):
        raise exc.NoTransportError(current, len(basis))

    return rho


class SuppressionPoint(NamedTuple):
    """One row of the suppression scan."""

    delta: float
    g: float
    p011_avg: float


def chain_hamiltonian(delta: float, g: float, g_cb: float | None = None) -> NDArray[np.float64]:
    """Two-electron 4-state chain |002>, |101>, |110>, |011> with |011> detuned by -delta."""
    g_cb = g if g_cb is None else g_cb
    s2 = hilbert.SQRT2

    return np.array(
        [
            [0.0, s2 * g, 0.0, s2 * g_cb],
            [s2 * g, 0.0, g_cb, 0.0],
            [0.0, g_cb, 0.0, g],
            [s2 * g_cb, 0.0, g, -delta],
        ],
    )


def infinite_time_average(
    h: NDArray[np.float64],
    initial: int,
    target: int,
    *,
    degeneracy_tol: float = 1e-9,
) -> float:
    """Infinite-time average of |<target|exp(-iHt)|initial>|^2 via eigenprojectors."""
    energies, vectors = eigh(h)
    scale = max(1.0, float(np.max(np.abs(energies))))

    average = 0.0
    start = 0
    for stop in range(1, len(energies) + 1):
        if stop < len(energies) and energies[stop] - energies[stop - 1] <= degeneracy_tol * scale:
            continue

        block = vectors[:, start:stop]
        amplitude = block[target] @ block[initial].conj()
        average += float(abs(amplitude) ** 2)
        start = stop

    return average


def time_averaged_population(
    h: NDArray[np.float64],
    initial: int,
    target: int,
    t_total: float,
) -> float:
    """Finite-window average of the target population, by direct propagation."""
    scale = max(float(np.linalg.norm(h, 2)), 1e-12)
    n_steps = max(4000, ceil(t_total * scale / 0.05))
    dt = t_total / n_steps
    step = expm(-1j * h * dt)

    psi = np.zeros(h.shape[0], dtype=np.complex128)
    psi[initial] = 1.0
    populations = np.empty(n_steps + 1)
    populations[0] = abs(psi[target]) ** 2

    for k in range(1, n_steps + 1):
        psi = step @ psi
        populations[k] = abs(psi[target]) ** 2

    return float(trapezoid(populations, dx=dt) / t_total)


def suppression_scan(
    base: SystemParams,
    delta_grid: Sequence[float],
    g_grid: Sequence[float],
    *,
    relative: bool = False,
) -> list[SuppressionPoint]:
    """Average |011> population from |002> over a (delta, g) grid.

    The resonant triple is kept degenerate and |011> sits at -delta. When `relative` is
    set, delta values are multiples of each g. The C-B/C-A coupling ratio of `base` is
    carried over to every grid point.
    """
    if not delta_grid or not g_grid:
        raise exc.InvalidGridError("delta_grid/g_grid", "must be non-empty")

    ratio = base.coupling_cb / base.g if base.g else 1.0
    rows: list[SuppressionPoint] = []

    for g in g_grid:
        for delta_value in delta_grid:
            delta = delta_value * g if relative else delta_value
            h = chain_hamiltonian(delta, g, ratio * g)
            rows.append(SuppressionPoint(delta, g, infinite_time_average(h, 0, 3)))

    return rows


__all__ = [
    "DensityMatrix",
    "Superoperator",
    "SuppressionPoint",
    "chain_hamiltonian",
    "evolve",
    "exclusive_liouvillian",
    "expectation_row",
    "infinite_time_average",
    "input_current",
    "jump_superoperator",
    "liouvillian",
    "output_current",
    "projector_sandwich",
    "stationary_basis",
    "steady_state",
    "suppression_scan",
    "time_averaged_population",
    "trace_row",
    "unvec",
    "vec",
]
