"""Charge basis of the three-dot cluster and the operators acting on it.

Basis states are |n_A n_B n_C> with n_A, n_B in {0, 1} and n_C in {0, 1, 2}, indexed as
6 n_A + 3 n_B + n_C. Spin is reduced out: the singlet matrix element survives as the
sqrt(2) enhancement on the 1 <-> 2 ladder of dot C.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product
from logging import getLogger
from math import sqrt
from typing import TYPE_CHECKING, Final, NamedTuple

import numpy as np
from numpy.typing import NDArray

from tridot_entangler.utils import const, exc

if TYPE_CHECKING:
    from tridot_entangler.models import SystemParams

LOGGER = getLogger(__name__)

OperatorMatrix = NDArray[np.complex128]

SQRT2: Final[float] = sqrt(2.0)


class ChargeState(NamedTuple):
    """Occupation numbers of dots A, B and C."""

    n_a: int
    n_b: int
    n_c: int

    @property
    def total(self) -> int:
        """Total charge."""
        return self.n_a + self.n_b + self.n_c

    @property
    def label(self) -> str:
        """Ket label, e.g. `101`."""
        return f"{self.n_a}{self.n_b}{self.n_c}"


def basis_index(s: ChargeState) -> int:
    """Return the position of a charge state in the 12-dim basis."""
    n_a, n_b, n_c = s

    if n_a not in (0, 1) or n_b not in (0, 1) or n_c not in (0, 1, 2):
        raise exc.InvalidOccupationError(n_a, n_b, n_c)

    return 6 * n_a + 3 * n_b + n_c


BASIS: Final[tuple[ChargeState, ...]] = tuple(
    ChargeState(*occ) for occ in product((0, 1), (0, 1), (0, 1, 2))
)

KET_002: Final[int] = basis_index(ChargeState(0, 0, 2))
KET_101: Final[int] = basis_index(ChargeState(1, 0, 1))
KET_110: Final[int] = basis_index(ChargeState(1, 1, 0))
KET_011: Final[int] = basis_index(ChargeState(0, 1, 1))
VACUUM: Final[int] = basis_index(ChargeState(0, 0, 0))

# Two-electron sector in chain order: |002>, |101>, |110>, |011>
TWO_ELECTRON_CHAIN: Final[tuple[int, ...]] = (KET_002, KET_101, KET_110, KET_011)


def _embed(a: NDArray[np.float64], b: NDArray[np.float64], c: NDArray[np.float64]) -> OperatorMatrix:
    """Tensor single-dot factors into the A (x) B (x) C space."""
    return np.kron(np.kron(a, b), c).astype(np.complex128)


_I2 = np.eye(2)
_I3 = np.eye(3)
_LOWER_2 = np.array([[0.0, 1.0], [0.0, 0.0]])


def _ladder_c(lower: int) -> NDArray[np.float64]:
    """Return |lower><lower + 1| on dot C."""
    op = np.zeros((3, 3))
    op[lower, lower + 1] = 1.0
    return op


@lru_cache(maxsize=1)
def lowering_ops() -> tuple[OperatorMatrix, OperatorMatrix, OperatorMatrix, OperatorMatrix]:
    """Return c_A, c_B, c_C (|0><1| on C) and c_2C (|1><2| on C)."""
    ops = (
        _embed(_LOWER_2, _I2, _I3),
        _embed(_I2, _LOWER_2, _I3),
        _embed(_I2, _I2, _ladder_c(0)),
        _embed(_I2, _I2, _ladder_c(1)),
    )

    for op in ops:
        op.setflags(write=False)

    return ops


@lru_cache(maxsize=1)
def number_ops() -> tuple[OperatorMatrix, OperatorMatrix, OperatorMatrix]:
    """Return the diagonal counters n_A, n_B, n_C."""
    ops = tuple(
        np.diag([float(s[k]) for s in BASIS]).astype(np.complex128) for k in range(3)
    )

    for op in ops:
        op.setflags(write=False)

    return ops  # type: ignore[return-value]


@lru_cache(maxsize=1)
def total_charge() -> OperatorMatrix:
    """Return the total-charge operator N = n_A + n_B + n_C."""
    n_a, n_b, n_c = number_ops()
    return n_a + n_b + n_c


def charge_energy(p: SystemParams, s: ChargeState) -> float:
    """Diagonal energy of a charge configuration (U_AB = 0)."""
    return (
        p.eps_a * s.n_a
        + p.eps_b * s.n_b
        + p.eps_c * s.n_c
        + p.u * (s.n_c == 2)  # noqa: PLR2004
        + p.v * s.n_c * (s.n_a + s.n_b)
    )


def build_full_hamiltonian(p: SystemParams) -> OperatorMatrix:
    """Build the charge-sector cluster Hamiltonian.

    Hopping links C with A (amplitude g) and C with B (amplitude g_cb); transfers that
    involve the doubly occupied level of C carry the sqrt(2) singlet factor.
    """
    c_a, c_b, c_c, c_2c = lowering_ops()

    hopping = p.g * (c_a.conj().T @ c_c + SQRT2 * c_a.conj().T @ c_2c) + p.coupling_cb * (
        c_b.conj().T @ c_c + SQRT2 * c_b.conj().T @ c_2c
    )

    h = np.diag([charge_energy(p, s) for s in BASIS]).astype(np.complex128)
    h += hopping + hopping.conj().T

    return h


def build_effective_hamiltonian(p: SystemParams) -> OperatorMatrix:
    """Build the resonant-frame Hamiltonian restricted to the |002>, |101>, |110> chain."""
    c_a, c_b, c_c, c_2c = lowering_ops()
    n_a, n_b, _ = number_ops()
    eye = np.eye(const.DIM, dtype=np.complex128)

    forward = p.g * SQRT2 * c_2c.conj().T @ c_a @ (eye - n_b) + p.coupling_cb * (
        c_c.conj().T @ c_b @ n_a
    )

    return forward + forward.conj().T


def build_hamiltonian(p: SystemParams, choice: const.HamiltonianChoice) -> OperatorMatrix:
    """Dispatch on the Hamiltonian choice."""
    if choice == const.HamiltonianChoice.FULL:
        return build_full_hamiltonian(p)

    return build_effective_hamiltonian(p)


class JumpOperator(NamedTuple):
    """A dissipator channel D[L] with its rate."""

    name: str
    operator: OperatorMatrix
    rate: float


def build_jump_operators(p: SystemParams) -> list[JumpOperator]:
    """List all incoherent channels: drains, source fills and (optionally) dephasing.

    Channels with zero rate are omitted.
    """
    c_a, c_b, c_c, c_2c = lowering_ops()

    jumps = [
        JumpOperator(const.Lead.A, c_a, p.gamma_a),
        JumpOperator(const.Lead.B, c_b, p.gamma_b),
        JumpOperator("fill_c", c_c.conj().T, p.gamma_c),
        JumpOperator("fill_2c", c_2c.conj().T, p.gamma_c),
    ]

    if p.gamma_phi > 0:
        jumps.extend(
            JumpOperator(f"dephase_{dot}", n, p.gamma_phi)
            for dot, n in zip("abc", number_ops(), strict=True)
        )

    return [jump for jump in jumps if jump.rate > 0]


__all__ = [
    "BASIS",
    "KET_002",
    "KET_011",
    "KET_101",
    "KET_110",
    "TWO_ELECTRON_CHAIN",
    "VACUUM",
    "ChargeState",
    "JumpOperator",
    "OperatorMatrix",
    "basis_index",
    "build_effective_hamiltonian",
    "build_full_hamiltonian",
    "build_hamiltonian",
    "build_jump_operators",
    "lowering_ops",
    "number_ops",
    "total_charge",
]
