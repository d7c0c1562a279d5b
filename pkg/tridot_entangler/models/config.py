"""Run and trajectory configuration, loaded from flat YAML files."""

from __future__ import annotations

from importlib.resources import files
from logging import getLogger
from pathlib import Path
from typing import Annotated, Any, ClassVar, Self

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

from tridot_entangler.utils import const, exc

from .params import SystemParams, make_operating_point

LOGGER = getLogger(__name__)

Seed = Annotated[int, Field(ge=0, lt=2**64)]


class TrajectoryConfig(BaseModel):
    """Settings of a single quantum-jump trajectory."""

    t_max: float = Field(gt=0)
    dt: float | None = Field(
        default=None,
        gt=0,
        description="Euler step; defaults to 0.002 / gamma_b.",
    )
    seed: Seed = 0
    method: const.TrajectoryMethod = const.TrajectoryMethod.WAITING_TIME
    record_c_events: bool = False
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    def resolved_dt(self, p: SystemParams) -> float:
        """Euler step, falling back to the default fraction of 1/gamma_b."""
        if self.dt is not None:
            return self.dt

        fastest = p.gamma_b if p.gamma_b > 0 else max(p.max_rate, 1.0)
        return const.EULER_DT_OVER_GAMMA_B / fastest


class RunConfig(BaseModel):
    """Everything a `tridot` subcommand needs, as read from one config file.

    When `eps_a` and `eps_b` are omitted the operating point is derived from
    (u, v, g, eps_c) so that the resonance conditions hold exactly.
    """

    label: str = "run"

    eps_a: float | None = None
    eps_b: float | None = None
    eps_c: float = 0.0
    u: float = 400.0
    v: float = 100.0
    g: float = 10.0
    g_cb: float | None = None
    gamma_a: float = Field(default=1.0, ge=0)
    gamma_b: float = Field(default=10.0, ge=0)
    gamma_c: float = Field(default=0.04, ge=0)
    gamma_phi: float = Field(default=0.0, ge=0)
    margin_threshold: float = Field(default=const.DEFAULT_MARGIN_THRESHOLD, gt=0)

    t_max: float = Field(default=2000.0, gt=0)
    dt: float | None = Field(default=None, gt=0)
    seed: Seed | None = None
    method: const.TrajectoryMethod = const.TrajectoryMethod.WAITING_TIME
    record_c_events: bool = False
    hamiltonian: const.HamiltonianChoice = const.HamiltonianChoice.EFFECTIVE
    n_traj: int = Field(default=0, ge=0)
    workers: int = Field(default=const.DEFAULT_WORKERS, ge=1)

    delta_min: float = 0.0
    delta_max: float = 40.0
    delta_num: int = Field(default=81, ge=1)
    delta_relative: bool = True
    g_grid: list[float] = Field(default_factory=lambda: [1.0, 5.0, 10.0, 20.0])

    tau_min: float = Field(default=0.01, gt=0)
    tau_max: float = Field(default=50.0, gt=0)
    tau_num: int = Field(default=60, ge=2)

    t_grid_max: float = Field(default=20.0, gt=0)
    t_grid_num: int = Field(default=11, ge=2)

    model_config: ClassVar[ConfigDict] = ConfigDict(extra="forbid")

    @field_validator("g_grid")
    @classmethod
    def _g_grid_increasing(cls, value: list[float]) -> list[float]:
        if not value or any(b <= a for a, b in zip(value, value[1:], strict=False)):
            raise ValueError("g_grid must be non-empty and strictly increasing")

        return value

    @classmethod
    def from_file(cls, path: Path, /, **overrides: Any) -> Self:
        """Load and validate a config file; keyword overrides win over file values."""
        if not path.is_file():
            raise exc.ConfigFileError(path, "file not found")

        try:
            content = YAML(typ="safe").load(path)
        except YAMLError as err:
            raise exc.ConfigFileError(path, str(err)) from err

        if content is None:
            content = {}
        elif not isinstance(content, dict):
            raise exc.ConfigFileError(path, f"expected a mapping, got {type(content).__name__}")

        content.setdefault("label", path.stem)
        content.update({k: v for k, v in overrides.items() if v is not None})

        try:
            config = cls.model_validate(content)
        except ValidationError as err:
            raise exc.ConfigFileError(path, str(err)) from err

        LOGGER.debug("Loaded config %r from %s", config.label, path)

        return config

    @classmethod
    def from_preset(cls, name: str, /, **overrides: Any) -> Self:
        """Load one of the bundled presets (`clean`, `dirty`, `suppression`, `validation`)."""
        resource = files("tridot_entangler.presets").joinpath(f"{name}.yaml")
        return cls.from_file(Path(str(resource)), **overrides)

    def system_params(self) -> SystemParams:
        """Build the SystemParams this config describes."""
        if self.eps_a is None or self.eps_b is None:
            return make_operating_point(
                self.u,
                self.v,
                self.g,
                self.eps_c,
                self.gamma_a,
                self.gamma_b,
                self.gamma_c,
                gamma_phi=self.gamma_phi,
                g_cb=self.g_cb,
                margin_threshold=self.margin_threshold,
            )

        return SystemParams(
            eps_a=self.eps_a,
            eps_b=self.eps_b,
            eps_c=self.eps_c,
            u=self.u,
            v=self.v,
            g=self.g,
            g_cb=self.g_cb,
            gamma_a=self.gamma_a,
            gamma_b=self.gamma_b,
            gamma_c=self.gamma_c,
            gamma_phi=self.gamma_phi,
        )

    def trajectory_config(self, seed: int) -> TrajectoryConfig:
        """Trajectory settings with an explicit seed."""
        return TrajectoryConfig(
            t_max=self.t_max,
            dt=self.dt,
            seed=seed,
            method=self.method,
            record_c_events=self.record_c_events,
            hamiltonian=self.hamiltonian,
        )

    def delta_grid(self) -> NDArray[np.float64]:
        """Detuning grid of the suppression scan."""
        if self.delta_max < self.delta_min:
            raise exc.InvalidGridError("delta", "delta_max < delta_min")

        return np.linspace(self.delta_min, self.delta_max, self.delta_num)

    def tau_grid(self) -> NDArray[np.float64]:
        """Geometric post-selection window grid, with 0 prepended."""
        if self.tau_max <= self.tau_min:
            raise exc.InvalidGridError("tau", "tau_max must exceed tau_min")

        return np.concatenate(([0.0], np.geomspace(self.tau_min, self.tau_max, self.tau_num)))

    def t_grid(self) -> NDArray[np.float64]:
        """Sampling times for ensemble populations."""
        return np.linspace(0.0, self.t_grid_max, self.t_grid_num)


__all__ = ["RunConfig", "TrajectoryConfig"]
