from __future__ import annotations

import math
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings


class GammaPrior(BaseModel):
    """Gamma(shape, rate) hyperprior; shape = rate = 0 is the improper 1/x prior."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    shape: float = Field(default=0.0, ge=0.0)
    rate: float = Field(default=0.0, ge=0.0)

    @property
    def is_improper(self) -> bool:
        return self.shape == 0.0 or self.rate == 0.0

    def log_density(self, x: float) -> float:
        """Unnormalized log density; the improper limit is -log(x)."""
        return (self.shape - 1.0) * math.log(x) - self.rate * x


class ChainConfig(BaseModel):
    """
    Settings shared by every Gibbs chain.

    ``iterations`` counts all sweeps including burn-in, so the defaults keep
    10000 post-burn-in draws.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    iterations: int = Field(default=20000, ge=1, description="Total sweeps")
    burn_in: int = Field(default=10000, ge=0, description="Discarded sweeps")
    thinning: int = Field(default=1, ge=1, description="Keep every n-th sweep")
    alpha_prior: GammaPrior = Field(default_factory=GammaPrior)
    tau: float = Field(
        default=1.0,
        gt=0.0,
        description="Inverse scale; held fixed during inference",
    )
    initial_alpha: float = Field(default=1.0, gt=0.0)
    log_every: int = Field(default=1000, ge=1)

    @model_validator(mode="after")
    def _burn_in_below_iterations(self) -> ChainConfig:
        if self.burn_in >= self.iterations:
            raise ValueError(
                f"iterations ({self.iterations}) must exceed burn_in ({self.burn_in})"
            )
        return self

    @property
    def n_recorded(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thinning))

    def is_recorded(self, sweep: int) -> bool:
        return sweep >= self.burn_in and (sweep - self.burn_in) % self.thinning == 0


PhiMode = Literal["fixed", "inferred", "continuous"]


class DynamicConfig(ChainConfig):
    """Settings of the time-varying sampler."""

    phi: float = Field(default=1.0, gt=0.0, description="Initial or fixed phi")
    phi_mode: PhiMode = "inferred"
    xi: float = Field(default=1.0, gt=0.0, description="Rate of evolution")
    gaps: tuple[float, ...] = Field(
        default=(), description="Time between consecutive epochs (continuous mode)"
    )
    phi_prior: GammaPrior = Field(default_factory=GammaPrior)
    mh_sigma: float = Field(default=0.1, gt=0.0)
    adapt_mh_sigma: bool = True
    target_acceptance: float = Field(default=0.3, gt=0.0, lt=1.0)
    first_appearance_filter: bool = True
    resample_total_masses: bool = True
    check_invariants: bool = False

    @field_validator("gaps")
    @classmethod
    def _positive_gaps(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if any(g <= 0 for g in v):
            raise ValueError("gaps between epochs must be positive")
        return v


class SimulationConfig(BaseModel):
    """Shape of a synthetic dataset."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs: int = Field(default=1, ge=1)
    list_length: int = Field(default=10, ge=1)
    lists_per_epoch: int = Field(default=1, ge=1)
    phi: float = Field(default=1.0, gt=0.0)
    xi: float | None = Field(default=None, gt=0.0)
    gaps: tuple[float, ...] = ()

    @model_validator(mode="after")
    def _gaps_match_epochs(self) -> SimulationConfig:
        if self.xi is not None and len(self.gaps) not in (0, self.epochs - 1):
            raise ValueError("gaps must have one entry per transition")
        return self


class RunConfig(BaseModel):
    """Everything a `bnpl fit` run needs; loaded from the ``--config`` JSON file."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    model: Literal["static", "dynamic"] = "dynamic"
    alpha_prior: GammaPrior = Field(default_factory=GammaPrior)
    phi_prior: GammaPrior = Field(default_factory=GammaPrior)
    phi_mode: PhiMode = "inferred"
    phi: float = Field(default=1.0, gt=0.0)
    xi: float = Field(default=1.0, gt=0.0)
    iterations: int = Field(default=20000, ge=1)
    burn_in: int = Field(default=10000, ge=0)
    thinning: int = Field(default=1, ge=1)
    seed: int | None = None
    chains: int = Field(default=1, ge=1)
    first_appearance_filter: bool = True
    resample_total_masses: bool = True
    mh_sigma: float = Field(default=0.1, gt=0.0)
    adapt_mh_sigma: bool = True
    time_unit_days: float = Field(default=7.0, gt=0.0)
    chain_file: str = "chain.jsonl"
    summary_file: str = "summary.csv"

    @model_validator(mode="after")
    def _burn_in_below_iterations(self) -> RunConfig:
        if self.burn_in >= self.iterations:
            raise ValueError(
                f"iterations ({self.iterations}) must exceed burn_in ({self.burn_in})"
            )
        return self

    def to_chain_config(self) -> ChainConfig:
        return ChainConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            thinning=self.thinning,
            alpha_prior=self.alpha_prior,
        )

    def to_dynamic_config(self, gaps: tuple[float, ...] = ()) -> DynamicConfig:
        return DynamicConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            thinning=self.thinning,
            alpha_prior=self.alpha_prior,
            phi=self.phi,
            phi_mode=self.phi_mode,
            xi=self.xi,
            gaps=gaps if self.phi_mode == "continuous" else (),
            phi_prior=self.phi_prior,
            mh_sigma=self.mh_sigma,
            adapt_mh_sigma=self.adapt_mh_sigma,
            first_appearance_filter=self.first_appearance_filter,
            resample_total_masses=self.resample_total_masses,
        )


class OutputSettings(BaseSettings):
    """
    Where CLI artifacts are written.

    Can be configured via three methods (in order of precedence):
    1. The ``--out`` flag (highest precedence)
    2. Environment variable BNPL_OUTPUT_DIR
    3. .env file in the current working directory (lowest precedence)
    """

    output_dir: Path = Field(
        default=Path("."), description="Directory for CLI artifacts"
    )

    model_config = {
        "env_prefix": "BNPL_",
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "case_sensitive": False,
        "validate_assignment": True,
        "frozen": True,
        "extra": "ignore",
    }
