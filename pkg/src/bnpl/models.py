"""Value types shared by the samplers, the oracle suite and the CLI.

Hot-path values (`PartialRanking`, `GammaProcessParams`, `PosteriorChain`) are
frozen dataclasses; everything crossing a file boundary is a pydantic model.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from datetime import date
from typing import Literal

import numpy as np
import numpy.typing as npt
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveInt,
    computed_field,
    field_validator,
)

from bnpl.errors import DataValidationError, DomainError

ItemId = str
"""Opaque item label. Fresh atoms get labels from a per-measure counter."""

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]


@dataclass(frozen=True)
class GammaProcessParams:
    """Gamma process Γ(α, τ, H): Lévy intensity α w⁻¹ e^{−wτ}."""

    alpha: float
    """Concentration α > 0."""
    tau: float = 1.0
    """Inverse scale τ > 0."""

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise DomainError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class PartialRanking:
    """An ordered top-m list of distinct items, optionally time-stamped."""

    items: tuple[ItemId, ...]
    epoch: int | None = None

    def __post_init__(self) -> None:
        if len(self.items) == 0:
            raise DataValidationError("a partial ranking needs at least one item")
        if len(set(self.items)) != len(self.items):
            dupes = sorted(i for i, n in Counter(self.items).items() if n > 1)
            raise DataValidationError(
                f"duplicate items within one list: {', '.join(dupes)}",
                epoch=None if self.epoch is None else str(self.epoch),
            )

    def __len__(self) -> int:
        return len(self.items)

    @classmethod
    def of(cls, items: Iterable[ItemId], epoch: int | None = None) -> PartialRanking:
        return cls(tuple(items), epoch)


def as_rankings(
    rankings: Iterable[PartialRanking | Sequence[ItemId]],
) -> list[PartialRanking]:
    """Coerce plain sequences of labels to `PartialRanking`."""
    return [
        r if isinstance(r, PartialRanking) else PartialRanking.of(r) for r in rankings
    ]


# ---- File-boundary models ---------------------------------------------------


class RankingRecord(BaseModel):
    """One `epoch,rank,item` row of a ranking CSV."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    epoch: int | date
    rank: PositiveInt
    item: str = Field(min_length=1)

    @field_validator("item")
    @classmethod
    def _strip_item(cls, v: str) -> str:
        v = v.strip()
        if not v:
            raise ValueError("item label is blank")
        return v


@dataclass(frozen=True)
class RankingDataset:
    """Validated rankings grouped by epoch, in epoch order."""

    epoch_labels: tuple[str, ...]
    lists: tuple[tuple[PartialRanking, ...], ...]
    gaps: tuple[float, ...] = ()
    """Δt between consecutive epochs, in configured time units."""

    @property
    def n_epochs(self) -> int:
        return len(self.epoch_labels)

    def all_rankings(self) -> list[PartialRanking]:
        return [r for epoch in self.lists for r in epoch]

    def to_records(self) -> list[RankingRecord]:
        records: list[RankingRecord] = []
        for label, epoch_lists in zip(self.epoch_labels, self.lists, strict=True):
            epoch: int | date
            if label.lstrip("-").isdigit():
                epoch = int(label)
            else:
                epoch = date.fromisoformat(label)
            for ranking in epoch_lists:
                for rank, item in enumerate(ranking.items, start=1):
                    records.append(RankingRecord(epoch=epoch, rank=rank, item=item))
        return records


# ---- Posterior output -------------------------------------------------------

UNSEEN_ITEM = "__unseen__"
"""Summary label of the mass of all items never observed."""


@dataclass(frozen=True)
class PosteriorChain:
    """Thinned post-burn-in draws of one Gibbs chain.

    Arrays are indexed ``[draw, epoch, item]``; the static model has one epoch.
    """

    model: Literal["static", "dynamic", "finite"]
    items: tuple[ItemId, ...]
    sweeps: IntArray
    weights: FloatArray
    w_star: FloatArray
    alpha: FloatArray
    phi: FloatArray = field(default_factory=lambda: np.zeros((0, 0)))
    xi: FloatArray | None = None
    acceptance: dict[str, float] = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return int(self.sweeps.shape[0])

    @property
    def n_epochs(self) -> int:
        return int(self.w_star.shape[1])

    def draw(self, index: int, epoch: int = 0) -> dict[ItemId, float]:
        """Weights of one draw keyed by item."""
        row = self.weights[index, epoch]
        return {item: float(w) for item, w in zip(self.items, row, strict=True)}

    def normalized_weights(self) -> FloatArray:
        """Per-draw normalized weights; the last column is the unseen mass."""
        full = np.concatenate([self.weights, self.w_star[..., None]], axis=-1)
        return full / full.sum(axis=-1, keepdims=True)

    def new_item_probability(self) -> FloatArray:
        """Probability that a new item takes rank 1, per draw and epoch."""
        return self.normalized_weights()[..., -1]

    def summary_rows(
        self, epoch_labels: Sequence[str] | None = None
    ) -> list[dict[str, object]]:
        """Posterior mean and central 95% interval of every normalized weight."""
        if self.n_draws == 0:
            raise DomainError("chain holds no draws")
        normalized = self.normalized_weights()
        means = normalized.mean(axis=0)
        lower, upper = np.quantile(normalized, [0.025, 0.975], axis=0)
        new_item = means[:, -1]
        labels = (
            list(epoch_labels)
            if epoch_labels
            else [str(t) for t in range(self.n_epochs)]
        )
        columns = [*self.items, UNSEEN_ITEM]
        rows: list[dict[str, object]] = []
        for t, label in enumerate(labels):
            for j, item in enumerate(columns):
                rows.append(
                    {
                        "epoch": label,
                        "item": item,
                        "posterior_mean": float(means[t, j]),
                        "q025": float(lower[t, j]),
                        "q975": float(upper[t, j]),
                        "new_item_prob": float(new_item[t]),
                    }
                )
        return rows


class GewekeStatistic(BaseModel):
    """Forward-vs-transition comparison of one scalar statistic."""

    model_config = ConfigDict(frozen=True)

    name: str
    z_score: float
    forward_mean: float
    transition_mean: float
    n_forward: int
    n_transition: int
    passed: bool

    @field_validator("z_score")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("z-score must be finite")
        return v


class GewekeReport(BaseModel):
    """Outcome of a sampler-correctness run."""

    model_config = ConfigDict(frozen=True)

    model: Literal["static", "dynamic"]
    threshold: float = 4.0
    statistics: list[GewekeStatistic]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.statistics)

    @property
    def max_abs_z(self) -> float:
        return max((abs(s.z_score) for s in self.statistics), default=0.0)

    def z(self, name: str) -> float:
        for s in self.statistics:
            if s.name == name:
                return s.z_score
        raise KeyError(name)


# ---- Chain file records -----------------------------------------------------


class ChainHeaderRecord(BaseModel):
    """First line of a JSON-lines chain file."""

    model_config = ConfigDict(frozen=True)

    type: Literal["header"] = "header"
    model: Literal["static", "dynamic"]
    chain: int
    items: list[ItemId]
    epoch_labels: list[str]
    seed: int | None = None


class ChainDrawRecord(BaseModel):
    """One thinned draw in a JSON-lines chain file."""

    model_config = ConfigDict(frozen=True)

    type: Literal["draw"] = "draw"
    chain: int
    sweep: int
    alpha: float
    phi: list[float] = Field(default_factory=list)
    xi: float | None = None
    w_star: list[float]
    weights: list[list[float]]


ChainRecord = ChainHeaderRecord | ChainDrawRecord


# ---- Diagnostics ------------------------------------------------------------


class CheckResult(BaseModel):
    """One oracle comparison: an estimate against its reference value."""

    model_config = ConfigDict(frozen=True)

    name: str
    estimate: float
    reference: float
    statistic: float = Field(description="z-score, KS p-value or relative error")
    passed: bool
    details: dict[str, float | int | str] = Field(default_factory=dict)


class DiagnosticReport(BaseModel):
    """Machine-readable outcome of a `bnpl diagnose` suite."""

    model_config = ConfigDict(frozen=True)

    suite: str
    seed: int | None = None
    checks: list[CheckResult] = Field(default_factory=list)
    geweke: list[GewekeReport] = Field(default_factory=list)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks) and all(g.passed for g in self.geweke)
