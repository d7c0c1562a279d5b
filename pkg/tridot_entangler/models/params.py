"""System parameters, resonance algebra and operating points."""

from __future__ import annotations

from logging import getLogger
from math import isclose, isfinite
from typing import ClassVar, NamedTuple, Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from tridot_entangler.utils import const, exc

LOGGER = getLogger(__name__)

RESONANCE_RTOL = 1e-12


class SystemParams(BaseModel):
    """Energies, couplings and lead rates of the three-dot cluster (ħ = 1)."""

    eps_a: float
    eps_b: float
    eps_c: float
    u: float = Field(description="On-site repulsion of dot C (U_CC).")
    v: float = Field(description="Inter-dot repulsion U_AC = U_BC.")
    g: float = Field(description="Coherent tunnelling amplitude on the C-A link.")
    g_cb: float | None = Field(
        default=None,
        description="Coherent tunnelling amplitude on the C-B link; defaults to `g`.",
    )
    gamma_a: float = Field(ge=0)
    gamma_b: float = Field(ge=0)
    gamma_c: float = Field(ge=0)
    gamma_phi: float = Field(default=0.0, ge=0)

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _check_finite(self) -> Self:
        for name, value in self.model_dump().items():
            if value is not None and not isfinite(value):
                raise exc.NonFiniteInputError(name)

        return self

    @property
    def coupling_cb(self) -> float:
        """Effective C-B coupling."""
        return self.g if self.g_cb is None else self.g_cb

    @property
    def is_resonant(self) -> bool:
        """Whether the resonance conditions hold to 1e-12 relative."""
        d_ca, d_cb = resonance_detunings(self.u, self.v)
        scale = max(abs(self.u), abs(self.v), abs(self.eps_c), 1.0)

        return isclose(
            self.eps_c - self.eps_a,
            d_ca,
            rel_tol=RESONANCE_RTOL,
            abs_tol=RESONANCE_RTOL * scale,
        ) and isclose(
            self.eps_c - self.eps_b,
            d_cb,
            rel_tol=RESONANCE_RTOL,
            abs_tol=RESONANCE_RTOL * scale,
        )

    @property
    def max_rate(self) -> float:
        """Largest incoherent rate."""
        return max(self.gamma_a, self.gamma_b, self.gamma_c, self.gamma_phi)


class SuppressionMargins(NamedTuple):
    """Left-hand sides of the suppression conditions, in units of |g|."""

    m1: float
    m2: float
    threshold: float = const.DEFAULT_MARGIN_THRESHOLD

    @property
    def suppressed(self) -> bool:
        """Whether both margins clear the threshold."""
        return min(self.m1, self.m2) >= self.threshold


def resonance_detunings(u: float, v: float) -> tuple[float, float]:
    """Return the required (eps_C - eps_A, eps_C - eps_B) for a resonant triple."""
    return v - u, -v


def suppression_margins(
    p: SystemParams,
    *,
    threshold: float = const.DEFAULT_MARGIN_THRESHOLD,
) -> SuppressionMargins:
    """Compute the suppression margins of the |011> route.

    Args:
        p (SystemParams): the parameter set
        threshold (float): margin both ratios must reach to count as suppressed

    Returns:
        SuppressionMargins: m1 and m2 divided by |g|

    Raises:
        UndefinedMarginError: if g is zero
    """
    if p.g == 0:
        raise exc.UndefinedMarginError

    m1 = abs((p.eps_c - p.eps_b) + (p.u - p.v)) / abs(p.g)
    m2 = abs((p.eps_c - p.eps_a) + p.v) / abs(p.g)

    return SuppressionMargins(m1, m2, threshold)


def make_operating_point(  # noqa: PLR0913
    u: float,
    v: float,
    g: float,
    eps_c: float,
    gamma_a: float,
    gamma_b: float,
    gamma_c: float,
    *,
    gamma_phi: float = 0.0,
    g_cb: float | None = None,
    margin_threshold: float = const.DEFAULT_MARGIN_THRESHOLD,
) -> SystemParams:
    """Build a resonant parameter set with eps_A - eps_B = U - 2V.

    A WARNING is logged, not raised, when U - 2V falls short of the margin threshold.
    """
    if not (isfinite(u) and isfinite(v)):
        raise exc.NonFiniteInputError("u, v")

    d_ca, d_cb = resonance_detunings(u, v)

    params = SystemParams(
        eps_a=eps_c - d_ca,
        eps_b=eps_c - d_cb,
        eps_c=eps_c,
        u=u,
        v=v,
        g=g,
        g_cb=g_cb,
        gamma_a=gamma_a,
        gamma_b=gamma_b,
        gamma_c=gamma_c,
        gamma_phi=gamma_phi,
    )

    if (u - 2 * v) < margin_threshold * abs(g):
        LOGGER.warning(
            "Operating point is not suppressed: U - 2V = %g < %g * |g| = %g",
            u - 2 * v,
            margin_threshold,
            margin_threshold * abs(g),
        )

    return params


__all__ = [
    "SuppressionMargins",
    "SystemParams",
    "make_operating_point",
    "resonance_detunings",
    "suppression_margins",
]
