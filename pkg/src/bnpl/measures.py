"""Gamma-process representation, Lévy functionals and top-m generation.

A gamma process Γ(α, τ, H) is held lazily: the atoms that have been looked at
are instantiated with their weights, everything else is a single remainder
mass. Because the normalized un-instantiated part is a Dirichlet process with
concentration α, a size-biased pick from it takes a Beta(1, α) fraction of the
remainder, so lazily generated lists are exact.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from bnpl.errors import DomainError
from bnpl.models import GammaProcessParams, ItemId, PartialRanking

logger = logging.getLogger(__name__)


# ---- Lévy functionals -------------------------------------------------------


def levy_intensity(params: GammaProcessParams, w: float) -> float:
    """λ(w) = α w⁻¹ e^{−wτ}."""
    if w <= 0:
        raise DomainError(f"intensity is defined for w > 0, got {w}")
    return params.alpha * math.exp(-w * params.tau) / w


def levy_psi(params: GammaProcessParams, z: float) -> float:
    """Laplace exponent ψ(z) = ∫ λ(w)(1 − e^{−zw}) dw = α log(1 + z/τ)."""
    if z < 0 or math.isnan(z):
        raise DomainError(f"psi is defined for z >= 0, got {z}")
    return params.alpha * math.log1p(z / params.tau)


def log_levy_kappa(params: GammaProcessParams, n: int, z: float) -> float:
    """log κ(n, z) = log α + log Γ(n) − n log(z + τ)."""
    if n < 1:
        raise DomainError(f"kappa diverges for n < 1, got n={n}")
    if z < 0 or math.isnan(z):
        raise DomainError(f"kappa is defined for z >= 0, got {z}")
    return math.log(params.alpha) + float(gammaln(n)) - n * math.log(z + params.tau)


def levy_kappa(params: GammaProcessParams, n: int, z: float) -> float:
    """n-th moment of the tilted intensity, κ(n, z) = α Γ(n) / (z + τ)ⁿ."""
    return math.exp(log_levy_kappa(params, n, z))


# ---- Atomic measures --------------------------------------------------------


@dataclass(frozen=True)
class AtomicMeasure:
    """Instantiated atoms plus the total mass of all un-instantiated ones."""

    atoms: Mapping[ItemId, float] = field(default_factory=dict)
    remainder_mass: float = 0.0
    label_prefix: str = "new-"
    issued: int = 0
    """Fresh labels handed out so far; the counter only moves forward."""

    def __post_init__(self) -> None:
        for item, w in self.atoms.items():
            if not (w > 0 and math.isfinite(w)):
                raise DomainError(f"atom {item!r} has non-positive weight {w}")
        if not (self.remainder_mass >= 0 and math.isfinite(self.remainder_mass)):
            raise DomainError(f"remainder mass must be >= 0, got {self.remainder_mass}")

    @property
    def instantiated_mass(self) -> float:
        return math.fsum(self.atoms.values())

    @property
    def total_mass(self) -> float:
        return self.instantiated_mass + self.remainder_mass

    def normalized(self) -> dict[ItemId, float]:
        total = self.total_mass
        if total <= 0:
            raise DomainError("cannot normalize a measure with zero mass")
        return {item: w / total for item, w in self.atoms.items()}

    def fresh_label(self, issued: int | None = None) -> tuple[ItemId, int]:
        """Next unused label and the advanced counter."""
        n = self.issued if issued is None else issued
        label = f"{self.label_prefix}{n}"
        while label in self.atoms:
            n += 1
            label = f"{self.label_prefix}{n}"
        return label, n + 1


def sample_truncated_gamma_process(
    params: GammaProcessParams,
    epsilon: float,
    rng: np.random.Generator,
    label_prefix: str = "g",
) -> AtomicMeasure:
    """Finite instantiation of Γ(α, τ, H) for Monte Carlo checks.

    Total mass T ~ Gamma(α, τ); proportions are Beta(1, α) stick-breaks, stopped
    once the residual is at most ``epsilon`` of T. The residual stays as
    remainder mass.
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    total = rng.gamma(params.alpha, 1.0 / params.tau)
    atoms: dict[ItemId, float] = {}
    left = 1.0
    while left > epsilon:
        v = rng.beta(1.0, params.alpha)
        piece = v * left
        left -= piece
        if piece * total > 0:
            atoms[f"{label_prefix}{len(atoms)}"] = piece * total
    return AtomicMeasure(
        atoms=atoms,
        remainder_mass=left * total,
        label_prefix=f"{label_prefix}+",
    )


def sample_top_m(
    params: GammaProcessParams,
    measure: AtomicMeasure,
    m: int,
    rng: np.random.Generator,
    epoch: int | None = None,
) -> tuple[PartialRanking, AtomicMeasure]:
    """Draw a top-m list by m size-biased picks without replacement.

    At each stage an un-chosen instantiated atom is picked with probability
    weight/S and a new atom with probability remainder/S. A new atom takes a
    Beta(1, α) fraction of the remainder and a fresh label. The returned
    measure has the new atoms materialized; total mass is unchanged.
    """
    if m <= 0:
        raise DomainError(f"list length must be positive, got {m}")
    labels = list(measure.atoms)
    weights = np.fromiter(measure.atoms.values(), dtype=float, count=len(labels))
    available = np.ones(len(labels), dtype=bool)
    remainder = measure.remainder_mass
    issued = measure.issued
    atoms = dict(measure.atoms)
    picked: list[ItemId] = []

    for _ in range(m):
        open_mass = float(weights[available].sum())
        stage_mass = open_mass + remainder
        if not stage_mass > 0:
            raise DomainError(
                f"measure exhausted after {len(picked)} picks; cannot draw top-{m}"
            )
        u = rng.uniform(0.0, stage_mass)
        if u >= open_mass:
            new_weight = rng.beta(1.0, params.alpha) * remainder
            if not new_weight > 0:
                # Beta draw underflowed; take the smallest representable piece
                new_weight = min(remainder, np.finfo(float).tiny)
            remainder -= new_weight
            label, issued = measure.fresh_label(issued)
            while label in atoms:
                label, issued = measure.fresh_label(issued)
            atoms[label] = new_weight
            labels.append(label)
            weights = np.append(weights, new_weight)
            available = np.append(available, False)
            picked.append(label)
        else:
            open_idx = np.flatnonzero(available)
            cum = np.cumsum(weights[open_idx])
            j = int(open_idx[min(np.searchsorted(cum, u, side="right"), len(cum) - 1)])
            available[j] = False
            picked.append(labels[j])

    updated = AtomicMeasure(
        atoms=atoms,
        remainder_mass=max(remainder, 0.0),
        label_prefix=measure.label_prefix,
        issued=issued,
    )
    return PartialRanking(tuple(picked), epoch), updated
