"""Static nonparametric Plackett-Luce model: likelihood and Gibbs sampler.

Observed lists are flattened into one slot array, one slot per (list, rank),
so every conditional is a handful of vectorized numpy operations.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from bnpl.config import ChainConfig
from bnpl.errors import (
    ConfigurationError,
    DataValidationError,
    DomainError,
    SamplerInternalError,
)
from bnpl.measures import AtomicMeasure, levy_psi, log_levy_kappa, sample_top_m
from bnpl.models import (
    FloatArray,
    GammaProcessParams,
    IntArray,
    ItemId,
    PartialRanking,
    PosteriorChain,
    as_rankings,
)

logger = logging.getLogger(__name__)


# ---- Likelihood -------------------------------------------------------------


def pl_log_probability(
    weights: Mapping[ItemId, float],
    remainder: float,
    ranking: PartialRanking | Sequence[ItemId],
) -> float:
    """Log probability of a top-m list under Plackett-Luce with the given masses.

    ``remainder`` is the mass of every item not in ``weights``; with a positive
    remainder the list is a top-m prefix of an infinite ranking.
    """
    items = ranking.items if isinstance(ranking, PartialRanking) else tuple(ranking)
    missing = [item for item in items if item not in weights]
    if missing:
        raise DomainError(
            f"ranked items without a weight: {', '.join(map(str, missing))}"
        )
    if remainder < 0:
        raise DomainError(f"remainder must be >= 0, got {remainder}")
    total = math.fsum(weights.values()) + remainder
    if not total > 0:
        raise DomainError("total mass must be positive")

    log_p = 0.0
    chosen = 0.0
    for item in items:
        w = weights[item]
        if w <= 0:
            return -math.inf
        log_p += math.log(w) - math.log(total - chosen)
        chosen += w
    return log_p


# ---- Sufficient statistics --------------------------------------------------


@dataclass(frozen=True)
class ObservedStats:
    """Counts and rank indicators of a collection of lists.

    Slots are the (list, rank) pairs in list order. ``slot_items[s]`` is the
    index of the item at slot ``s``; ``offsets[l]:offsets[l+1]`` are the slots
    of list ``l``. δ(l, i, k) = 1 unless item k sits in list l at a rank
    strictly before i.
    """

    unique_items: tuple[ItemId, ...]
    counts: IntArray
    slot_items: IntArray
    offsets: IntArray

    @property
    def n_items(self) -> int:
        return len(self.unique_items)

    @property
    def n_lists(self) -> int:
        return len(self.offsets) - 1

    @property
    def n_slots(self) -> int:
        return int(self.slot_items.shape[0])

    @property
    def slot_lists(self) -> IntArray:
        return np.repeat(np.arange(self.n_lists), np.diff(self.offsets))

    def index(self, item: ItemId) -> int:
        return self.unique_items.index(item)

    def delta(self, list_index: int, rank: int, item: ItemId) -> int:
        """δ for 1-based ``rank``."""
        k = self.index(item)
        start = int(self.offsets[list_index])
        stop = start + rank - 1
        return int(k not in self.slot_items[start:stop])

    def delta_matrix(self) -> IntArray:
        """Dense (slots × items) δ; meant for small fixtures."""
        out = np.ones((self.n_slots, self.n_items), dtype=np.int64)
        for ell in range(self.n_lists):
            start, stop = int(self.offsets[ell]), int(self.offsets[ell + 1])
            for s in range(start, stop):
                out[s + 1 : stop, self.slot_items[s]] = 0
        return out


def compute_occurrence_stats(
    rankings: Iterable[PartialRanking | Sequence[ItemId]],
    items: Sequence[ItemId] | None = None,
) -> ObservedStats:
    """Index items (first-seen order unless ``items`` is given) and count them.

    Passing ``items`` lets several epochs share one item index; such items may
    have zero count.
    """
    rankings = as_rankings(rankings)
    if items is None:
        order: dict[ItemId, int] = {}
        for r in rankings:
            for item in r.items:
                order.setdefault(item, len(order))
    else:
        order = {item: k for k, item in enumerate(items)}
        if len(order) != len(items):
            raise DataValidationError("item index contains duplicates")

    slot_items: list[int] = []
    offsets = [0]
    for r in rankings:
        for item in r.items:
            if item not in order:
                raise DataValidationError(
                    f"item {item!r} missing from the item index"
                )
            slot_items.append(order[item])
        offsets.append(len(slot_items))

    slots = np.asarray(slot_items, dtype=np.int64)
    return ObservedStats(
        unique_items=tuple(order),
        counts=np.bincount(slots, minlength=len(order)).astype(np.int64),
        slot_items=slots,
        offsets=np.asarray(offsets, dtype=np.int64),
    )


def item_z_sums(stats: ObservedStats, Z: FloatArray) -> FloatArray:
    """Σ_{l,i} δ(l, i, k) Z_{li} for every item k.

    Every item sees all of ΣZ except, in lists where it appears, the slots
    after its own rank.
    """
    total = float(Z.sum())
    if stats.n_slots == 0:
        return np.full(stats.n_items, total)
    cum = np.cumsum(Z)
    list_end = cum[stats.offsets[1:] - 1][stats.slot_lists]
    tail_after = list_end - cum
    excluded = np.bincount(
        stats.slot_items, weights=tail_after, minlength=stats.n_items
    )
    return total - excluded


def chosen_before(stats: ObservedStats, w: FloatArray) -> FloatArray:
    """Mass already listed ahead of every slot within its own list."""
    if stats.n_slots == 0:
        return np.zeros(0)
    listed = w[stats.slot_items]
    cum = np.cumsum(listed)
    list_start = np.concatenate([[0.0], cum])[stats.offsets[:-1]][stats.slot_lists]
    return cum - list_start - listed


# ---- Latent state and conditionals -----------------------------------------


@dataclass
class StaticLatentState:
    """Current point of a static chain; the update functions mutate it."""

    Z: FloatArray
    w: FloatArray
    w_star: float
    alpha: float
    tau: float = 1.0

    @property
    def total_mass(self) -> float:
        return float(self.w.sum()) + self.w_star


def z_rates(state: StaticLatentState, stats: ObservedStats) -> FloatArray:
    """Exp rates w_* + Σ_k δ(l, i, k) w_k per slot."""
    return state.w_star + float(state.w.sum()) - chosen_before(stats, state.w)


def weight_rates(state: StaticLatentState, stats: ObservedStats) -> FloatArray:
    """Gamma rates τ + Σ δ Z per observed item."""
    return state.tau + item_z_sums(stats, state.Z)


def gibbs_update_Z(
    state: StaticLatentState, stats: ObservedStats, rng: np.random.Generator
) -> FloatArray:
    state.Z = rng.exponential(1.0 / z_rates(state, stats))
    return state.Z


def gibbs_update_weights(
    state: StaticLatentState, stats: ObservedStats, rng: np.random.Generator
) -> FloatArray:
    """w_k ~ Gamma(n_k, τ + Σ δ Z)."""
    if np.any(stats.counts < 1):
        bad = [stats.unique_items[k] for k in np.flatnonzero(stats.counts < 1)]
        raise SamplerInternalError(
            f"items with no occurrences cannot be fixed atoms: {bad}",
            error_code="zero_count_atom",
        )
    state.w = rng.gamma(stats.counts, 1.0 / weight_rates(state, stats))
    return state.w


def gibbs_update_wstar(state: StaticLatentState, rng: np.random.Generator) -> float:
    """w_* ~ Gamma(α, τ + ΣZ)."""
    rate = state.tau + float(state.Z.sum())
    state.w_star = float(rng.gamma(state.alpha, 1.0 / rate))
    return state.w_star


def alpha_posterior(
    state: StaticLatentState, n_items: int, config: ChainConfig
) -> tuple[float, float]:
    """Shape and rate of the α conditional."""
    prior = config.alpha_prior
    shape = prior.shape + n_items
    rate = prior.rate + math.log1p(float(state.Z.sum()) / state.tau)
    if not (shape > 0 and rate > 0):
        raise ConfigurationError(
            "alpha posterior is improper; use a proper alpha prior "
            "when no items are observed",
            error_code="improper_alpha_posterior",
            details={"shape": shape, "rate": rate},
        )
    return shape, rate


def gibbs_update_alpha(
    state: StaticLatentState,
    stats: ObservedStats,
    config: ChainConfig,
    rng: np.random.Generator,
) -> float:
    """α ~ Gamma(a + K, b + log(1 + ΣZ/τ)), then an immediate w_* redraw."""
    shape, rate = alpha_posterior(state, stats.n_items, config)
    state.alpha = float(rng.gamma(shape, 1.0 / rate))
    gibbs_update_wstar(state, rng)
    return state.alpha


def initial_state(
    stats: ObservedStats, config: ChainConfig, rng: np.random.Generator
) -> StaticLatentState:
    """w_k = n_k/τ, w_* = α/τ, Z from its conditional."""
    tau = config.tau
    state = StaticLatentState(
        Z=np.zeros(stats.n_slots),
        w=stats.counts.astype(float) / tau,
        w_star=config.initial_alpha / tau,
        alpha=config.initial_alpha,
        tau=tau,
    )
    gibbs_update_Z(state, stats, rng)
    return state


def gibbs_sweep(
    state: StaticLatentState,
    stats: ObservedStats,
    config: ChainConfig,
    rng: np.random.Generator,
) -> StaticLatentState:
    gibbs_update_Z(state, stats, rng)
    gibbs_update_weights(state, stats, rng)
    gibbs_update_wstar(state, rng)
    gibbs_update_alpha(state, stats, config, rng)
    return state


def run_static_gibbs(
    rankings: Iterable[PartialRanking | Sequence[ItemId]],
    config: ChainConfig,
    rng: np.random.Generator,
) -> PosteriorChain:
    """Run one chain and keep the thinned post-burn-in draws of (w, w_*, α)."""
    rankings = as_rankings(rankings)
    if not rankings:
        raise DomainError("at least one ranking is required")
    stats = compute_occurrence_stats(rankings)
    state = initial_state(stats, config, rng)

    n_draws = config.n_recorded
    weights = np.empty((n_draws, 1, stats.n_items))
    w_star = np.empty((n_draws, 1))
    alpha = np.empty(n_draws)
    sweeps = np.empty(n_draws, dtype=np.int64)

    logger.info(
        "static chain: %d lists, %d items, %d sweeps",
        stats.n_lists,
        stats.n_items,
        config.iterations,
    )
    d = 0
    for sweep in range(config.iterations):
        gibbs_sweep(state, stats, config, rng)
        if config.is_recorded(sweep):
            weights[d, 0] = state.w
            w_star[d, 0] = state.w_star
            alpha[d] = state.alpha
            sweeps[d] = sweep
            d += 1
        if (sweep + 1) % config.log_every == 0:
            logger.debug(
                "sweep %d: alpha=%.4g w_star=%.4g total=%.4g",
                sweep + 1,
                state.alpha,
                state.w_star,
                state.total_mass,
            )

    return PosteriorChain(
        model="static",
        items=stats.unique_items,
        sweeps=sweeps,
        weights=weights,
        w_star=w_star,
        alpha=alpha,
        phi=np.zeros((n_draws, 0)),
    )


def predictive_new_item_prob(sample: StaticLatentState | PosteriorChain) -> float:
    """Probability that an unseen item is ranked first: w_* / (w_* + Σ w_k).

    For a chain this is the average over its draws (first epoch).
    """
    if isinstance(sample, PosteriorChain):
        return float(sample.new_item_probability()[:, 0].mean())
    total = sample.total_mass
    if not total > 0:
        raise DomainError("total mass must be positive")
    return sample.w_star / total


# ---- Marginal likelihood and generation -------------------------------------


def log_marginal_likelihood(
    stats: ObservedStats, Z: FloatArray, params: GammaProcessParams
) -> float:
    """log e^{−ψ(ΣZ)} Π_k κ(n_k, Σ δ Z); base-density factors are left out."""
    z_sums = item_z_sums(stats, Z)
    log_p = -levy_psi(params, float(Z.sum()))
    for n_k, z_k in zip(stats.counts, z_sums, strict=True):
        log_p += log_levy_kappa(params, int(n_k), float(z_k))
    return log_p


def simulate_static_dataset(
    params: GammaProcessParams,
    n_lists: int,
    list_length: int,
    rng: np.random.Generator,
    label_prefix: str = "item-",
) -> tuple[list[PartialRanking], AtomicMeasure]:
    """Draw lists from one lazily instantiated Γ(α, τ) measure.

    Returns the lists and the measure with every listed atom instantiated.
    """
    if n_lists < 1:
        raise DomainError(f"need at least one list, got {n_lists}")
    measure = AtomicMeasure(
        remainder_mass=float(rng.gamma(params.alpha, 1.0 / params.tau)),
        label_prefix=label_prefix,
    )
    rankings: list[PartialRanking] = []
    for _ in range(n_lists):
        ranking, measure = sample_top_m(params, measure, list_length, rng, epoch=0)
        rankings.append(ranking)
    return rankings, measure
