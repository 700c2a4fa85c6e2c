"""Time-varying Plackett-Luce model built on Pitt-Walker dependent gamma processes.

One transition G_t → G_{t+1} draws Poisson counts c ~ Poi(φ w) for every atom,
keeps atoms with c > 0 at weight Gamma(c, τ+φ) and adds an independent
Γ(α, τ+φ) innovation. The Gibbs sampler tracks every observed item's weight
trajectory, the per-transition counts and the lumped mass of everything else.

Array conventions: ``w`` is (T, K), ``w_star`` is (T,), ``c`` is (T-1, K),
``c_star`` and ``phi`` are (T-1,); transition ``t`` links epochs t and t+1.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps
from scipy.special import gammaln, logsumexp, xlogy

from bnpl.config import DynamicConfig, SimulationConfig
from bnpl.errors import ConfigurationError, DomainError, SamplerInternalError
from bnpl.measures import AtomicMeasure, sample_top_m
from bnpl.models import (
    FloatArray,
    GammaProcessParams,
    IntArray,
    ItemId,
    PartialRanking,
    PosteriorChain,
    as_rankings,
)
from bnpl.static_model import (
    ObservedStats,
    chosen_before,
    compute_occurrence_stats,
    item_z_sums,
)

logger = logging.getLogger(__name__)

SERIES_TAIL = 1e-12
"""Relative mass at which count series are cut off."""

ZTP_INVERSION_LIMIT = 30.0
_ADAPT_BATCH = 50


# ---- Forward process --------------------------------------------------------


@dataclass(frozen=True)
class TransitionCounts:
    """Latent counts drawn by one Pitt-Walker step."""

    atom_counts: Mapping[ItemId, int]
    remainder_count: int
    remainder_tables: tuple[int, ...] = ()
    """Sizes of the distinct un-instantiated atoms the remainder count hit."""

    @property
    def total(self) -> int:
        return sum(self.atom_counts.values()) + self.remainder_count


def _crp_table_sizes(n: int, alpha: float, rng: np.random.Generator) -> list[int]:
    tables: list[int] = []
    for i in range(n):
        if rng.uniform() * (alpha + i) < alpha:
            tables.append(1)
        else:
            sizes = np.asarray(tables, dtype=float)
            tables[int(rng.choice(len(tables), p=sizes / i))] += 1
    return tables


def pitt_walker_step(
    measure: AtomicMeasure,
    params: GammaProcessParams,
    phi: float,
    rng: np.random.Generator,
) -> tuple[TransitionCounts, AtomicMeasure]:
    """Propagate G_t to G_{t+1}.

    Counts that land on the un-instantiated remainder are spread over distinct
    atoms by a Chinese restaurant process with concentration α (the remainder
    normalizes to a Dirichlet process); every table becomes a new instantiated
    atom of G_{t+1}.
    """
    if not phi > 0:
        raise DomainError(f"phi must be positive, got {phi}")
    rate = params.tau + phi
    labels = list(measure.atoms)
    weights = np.fromiter(measure.atoms.values(), dtype=float, count=len(labels))
    counts = rng.poisson(phi * weights)
    survivors = rng.gamma(np.maximum(counts, 1), 1.0 / rate)

    atoms: dict[ItemId, float] = {
        label: float(w)
        for label, c, w in zip(labels, counts, survivors, strict=True)
        if c > 0 and w > 0
    }
    remainder_count = int(rng.poisson(phi * measure.remainder_mass))
    tables = _crp_table_sizes(remainder_count, params.alpha, rng)
    issued = measure.issued
    for size in tables:
        label, issued = measure.fresh_label(issued)
        atoms[label] = float(rng.gamma(size, 1.0 / rate))

    counts_out = TransitionCounts(
        atom_counts={label: int(c) for label, c in zip(labels, counts, strict=True)},
        remainder_count=remainder_count,
        remainder_tables=tuple(tables),
    )
    successor = AtomicMeasure(
        atoms=atoms,
        remainder_mass=float(rng.gamma(params.alpha, 1.0 / rate)),
        label_prefix=measure.label_prefix,
        issued=issued,
    )
    return counts_out, successor


def expected_next_total_mass(
    total_mass: float, params: GammaProcessParams, phi: float
) -> float:
    """E[G_{t+1}(𝕏) | G_t(𝕏)] = (φ G_t(𝕏) + α) / (τ + φ)."""
    return (phi * total_mass + params.alpha) / (params.tau + phi)


def lifetime_death_prob(
    w: float,
    phis: float | Sequence[float],
    tau: float,
    t_horizon: int,
) -> float:
    """Probability that an atom of mass ``w`` at epoch 1 is dead at ``t_horizon``.

    ``phis`` holds φ_1, φ_2, ... (a scalar means constant φ).
    """
    if t_horizon < 2:
        raise DomainError(f"t_horizon must be >= 2, got {t_horizon}")
    if w <= 0:
        raise DomainError(f"w must be positive, got {w}")
    n_steps = t_horizon - 1
    if isinstance(phis, int | float):
        schedule = [float(phis)] * n_steps
    else:
        schedule = [float(p) for p in phis]
        if len(schedule) < n_steps:
            raise DomainError(f"need {n_steps} phi values, got {len(schedule)}")
    if any(p <= 0 for p in schedule[:n_steps]):
        raise DomainError("phi values must be positive")

    y = schedule[n_steps - 1]
    for s in range(n_steps - 2, -1, -1):
        y = y * schedule[s] / (schedule[s] + tau + y)
    return math.exp(-y * w)


def phi_from_continuous_time(tau: float, xi: float, dt: float) -> float:
    """φ = τ / (e^{τξΔt} − 1) for the diffusion skeleton observed Δt apart."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if not xi > 0:
        raise DomainError(f"xi must be positive, got {xi}")
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    rate = tau * xi * dt
    if rate > 700.0:
        return max(tau * math.exp(-rate), np.finfo(float).tiny)
    return tau / math.expm1(rate)


def phi_schedule(tau: float, xi: float, gaps: Sequence[float]) -> FloatArray:
    return np.array([phi_from_continuous_time(tau, xi, dt) for dt in gaps])


# ---- Count helpers ----------------------------------------------------------


def sample_zero_truncated_poisson(
    lam: FloatArray | float, rng: np.random.Generator
) -> IntArray:
    """Poisson(λ) conditioned on ≥ 1.

    Inversion below ``ZTP_INVERSION_LIMIT``, rejection from the untruncated
    Poisson above it.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(~(lam > 0)):
        raise DomainError("zero-truncated Poisson needs positive rates")
    out = np.empty(lam.shape, dtype=np.int64)
    small = lam < ZTP_INVERSION_LIMIT
    if np.any(small):
        ls = lam[small]
        # survival level uniform on (0, P(X >= 1)]
        s = (1.0 - rng.random(ls.shape)) * -np.expm1(-ls)
        q = sps.poisson.isf(s, ls)
        # isf is nan once s underflows against the mass at 0; the limit is 1
        out[small] = np.where(np.isfinite(q), np.maximum(q, 1), 1).astype(np.int64)
    big = ~small
    if np.any(big):
        lb = lam[big]
        draws = rng.poisson(lb)
        zero = draws == 0
        while np.any(zero):
            draws[zero] = rng.poisson(lb[zero])
            zero = draws == 0
        out[big] = draws
    return out


def zero_count_probability(
    w: FloatArray | float, phi: FloatArray | float, tau: float
) -> FloatArray | float:
    """P(c = 0) of the two-state move for an atom with w_{t+1} = 0."""
    return 1.0 / (1.0 + phi * w * (tau + phi))


def _count_log_terms(
    lam: FloatArray,
    shape0: FloatArray | float,
    rate: FloatArray,
    w_next: FloatArray,
    c_min: int,
) -> tuple[IntArray, FloatArray]:
    """log Poi(c; λ) + log Gamma(w'; shape0 + c, rate) for c = c_min, c_min+1, ...

    Terms are unimodal in c; the grid is doubled until the last term is below
    ``SERIES_TAIL`` of the running sum while already decaying geometrically.
    """
    lam = lam[:, None]
    rate = rate[:, None]
    log_w = np.log(np.maximum(w_next, np.finfo(float).tiny))[:, None]
    shape0 = np.broadcast_to(np.asarray(shape0, dtype=float), w_next.shape)[:, None]
    scale = np.sqrt(lam * rate * np.exp(log_w))
    width = int(2 * math.ceil(float(scale.max(initial=0.0))) + 30)
    while True:
        cs = np.arange(c_min, c_min + width)
        shapes = shape0 + cs
        terms = (
            xlogy(cs, lam)
            - lam
            - gammaln(cs + 1.0)
            + shapes * np.log(rate)
            + (shapes - 1.0) * log_w
            - rate * np.exp(log_w)
            - gammaln(shapes)
        )
        lse = logsumexp(terms, axis=1)
        finite = np.isfinite(lse)
        tail_ok = np.all(terms[finite, -1] - lse[finite] < math.log(SERIES_TAIL))
        if tail_ok or width > 1_000_000:
            return cs, terms
        width *= 2


def log_count_marginal(
    lam: FloatArray,
    shape0: FloatArray | float,
    rate: FloatArray,
    w_next: FloatArray,
    c_min: int,
) -> FloatArray:
    """log Σ_c Poi(c; λ) Gamma(w'; shape0 + c, rate), elementwise."""
    if lam.size == 0:
        return np.zeros(0)
    _, terms = _count_log_terms(lam, shape0, rate, w_next, c_min)
    return logsumexp(terms, axis=1)


def sample_counts_exact(
    lam: FloatArray,
    shape0: FloatArray | float,
    rate: FloatArray,
    w_next: FloatArray,
    c_min: int,
    rng: np.random.Generator,
) -> IntArray:
    """Draw c from its exact conditional given both endpoint weights."""
    if lam.size == 0:
        return np.zeros(0, dtype=np.int64)
    cs, terms = _count_log_terms(lam, shape0, rate, w_next, c_min)
    probs = np.exp(terms - logsumexp(terms, axis=1, keepdims=True))
    cum = np.cumsum(probs, axis=1)
    u = rng.random(lam.shape[0])
    idx = np.minimum((cum < u[:, None]).sum(axis=1), len(cs) - 1)
    return cs[idx].astype(np.int64)


# ---- Data and latent state --------------------------------------------------


@dataclass(frozen=True)
class DynamicData:
    """Per-epoch statistics over one shared item index."""

    items: tuple[ItemId, ...]
    stats: tuple[ObservedStats, ...]
    counts: IntArray
    """n_{tk}, shape (T, K)."""
    first_seen: IntArray
    last_seen: IntArray

    @property
    def n_epochs(self) -> int:
        return len(self.stats)

    @property
    def n_items(self) -> int:
        return len(self.items)


def prepare_dynamic_data(
    epochs: Sequence[Iterable[PartialRanking | Sequence[ItemId]]],
) -> DynamicData:
    """Index items in first-seen order across epochs and count them per epoch."""
    if len(epochs) == 0:
        raise DomainError("need at least one epoch")
    per_epoch = [as_rankings(e) for e in epochs]
    order: dict[ItemId, None] = {}
    for lists in per_epoch:
        for ranking in lists:
            for item in ranking.items:
                order.setdefault(item, None)
    items = tuple(order)
    stats = tuple(compute_occurrence_stats(lists, items=items) for lists in per_epoch)
    counts = (
        np.stack([s.counts for s in stats])
        if items
        else np.zeros((len(stats), 0), dtype=np.int64)
    )
    seen = counts > 0
    first = seen.argmax(axis=0)
    last = len(stats) - 1 - seen[::-1].argmax(axis=0)
    return DynamicData(
        items=items,
        stats=stats,
        counts=counts,
        first_seen=first.astype(np.int64),
        last_seen=last.astype(np.int64),
    )


@dataclass
class DynamicLatentState:
    """Current point of a dynamic chain; the update functions mutate it."""

    w: FloatArray
    w_star: FloatArray
    c: IntArray
    c_star: IntArray
    Z: list[FloatArray]
    alpha: float
    phi: FloatArray
    xi: float | None = None
    tau: float = 1.0
    gaps: tuple[float, ...] = field(default=())

    @property
    def n_epochs(self) -> int:
        return int(self.w_star.shape[0])

    @property
    def total_masses(self) -> FloatArray:
        return self.w.sum(axis=1) + self.w_star

    def z_totals(self) -> FloatArray:
        return np.array([float(z.sum()) for z in self.Z])


def item_z_matrix(data: DynamicData, Z: Sequence[FloatArray]) -> FloatArray:
    """Σ_i δ_{tik} Z_{ti} for every epoch and item, shape (T, K)."""
    if data.n_items == 0:
        return np.zeros((data.n_epochs, 0))
    return np.stack([item_z_sums(s, z) for s, z in zip(data.stats, Z, strict=True)])


def _neighbour_phis(phi: FloatArray, n_epochs: int) -> tuple[FloatArray, FloatArray]:
    prev = np.zeros(n_epochs)
    nxt = np.zeros(n_epochs)
    prev[1:] = phi
    nxt[:-1] = phi
    return prev, nxt


def backward_tilts(
    S: FloatArray, phi: FloatArray, tau: float, stop: int = 0
) -> FloatArray:
    """x_{T-1} = S_{T-1}, x_t = S_t + φ_t x_{t+1} / (τ + φ_t + x_{t+1}).

    Entries before ``stop`` are left at zero.
    """
    T = S.shape[0]
    x = np.zeros(T)
    x[T - 1] = S[T - 1]
    for t in range(T - 2, stop - 1, -1):
        x[t] = S[t] + phi[t] * x[t + 1] / (tau + phi[t] + x[t + 1])
    return x


def forward_tilts(S: FloatArray, phi: FloatArray, tau: float, stop: int) -> FloatArray:
    """x_0 = S_0, x_t = S_t + φ_{t-1} x_{t-1} / (τ + φ_{t-1} + x_{t-1}), t < stop."""
    x = np.zeros(stop)
    if stop == 0:
        return x
    x[0] = S[0]
    for t in range(1, stop):
        x[t] = S[t] + phi[t - 1] * x[t - 1] / (tau + phi[t - 1] + x[t - 1])
    return x


def initial_dynamic_state(
    data: DynamicData, config: DynamicConfig, rng: np.random.Generator
) -> DynamicLatentState:
    """Observed lifetimes at n/τ (at least 1/τ), counts near φw, Z conditional."""
    T, tau = data.n_epochs, config.tau
    if config.phi_mode == "continuous":
        if len(config.gaps) != T - 1:
            raise ConfigurationError(
                f"continuous phi needs {T - 1} gaps, got {len(config.gaps)}",
                error_code="gap_count_mismatch",
            )
        xi: float | None = config.xi
        phi = phi_schedule(tau, config.xi, config.gaps)
    else:
        xi = None
        phi = np.full(T - 1, config.phi)

    epochs = np.arange(T)[:, None]
    alive = (epochs >= data.first_seen[None, :]) & (epochs <= data.last_seen[None, :])
    w = np.where(alive, np.maximum(data.counts, 1) / tau, 0.0)
    linked = alive[:-1] & alive[1:]
    c = np.where(linked, np.maximum(np.rint(phi[:, None] * w[:-1]), 1), 0)
    w_star = np.full(T, config.initial_alpha / tau)
    state = DynamicLatentState(
        w=w,
        w_star=w_star,
        c=c.astype(np.int64),
        c_star=np.rint(phi * w_star[:-1]).astype(np.int64),
        Z=[np.zeros(s.n_slots) for s in data.stats],
        alpha=config.initial_alpha,
        phi=phi,
        xi=xi,
        tau=tau,
        gaps=tuple(config.gaps),
    )
    update_Z_dynamic(state, data, rng)
    return state


def validate_dynamic_state(state: DynamicLatentState, data: DynamicData) -> None:
    """Raise `SamplerInternalError` unless lifetimes and counts are coherent."""
    if np.any(state.w < 0) or np.any(state.w_star < 0):
        raise SamplerInternalError("negative weight", error_code="negative_weight")
    if np.any(state.c < 0) or np.any(state.c_star < 0):
        raise SamplerInternalError("negative count", error_code="negative_count")
    live = state.w > 0
    if np.any(data.counts[~live] > 0):
        raise SamplerInternalError(
            "observed item has zero weight", error_code="observed_item_dead"
        )
    for k, item in enumerate(data.items):
        idx = np.flatnonzero(live[:, k])
        if idx.size and idx[-1] - idx[0] + 1 != idx.size:
            raise SamplerInternalError(
                f"lifetime of {item!r} is not contiguous",
                error_code="lifetime_gap",
                details={"alive_epochs": idx.tolist()},
            )
    if np.any(state.c[~live[:-1]] > 0):
        raise SamplerInternalError(
            "positive count on a dead atom", error_code="count_on_dead_atom"
        )
    propagated = live[:-1]
    if np.any((state.c[propagated] > 0) != live[1:][propagated]):
        raise SamplerInternalError(
            "atom survival disagrees with its count", error_code="survival_mismatch"
        )


# ---- Gibbs steps ------------------------------------------------------------


def update_total_masses_and_rescale(
    state: DynamicLatentState, rng: np.random.Generator
) -> FloatArray:
    """Redraw the total-mass chain from its prior given (α, φ) and rescale weights.

    Not an exact conditional of the joint; `DynamicConfig.resample_total_masses`
    switches it off.
    """
    T, tau = state.n_epochs, state.tau
    old = state.total_masses
    masses = np.empty(T)
    masses[0] = rng.gamma(state.alpha, 1.0 / tau)
    for t in range(T - 1):
        m = rng.poisson(state.phi[t] * masses[t])
        masses[t + 1] = rng.gamma(state.alpha + m, 1.0 / (tau + state.phi[t]))
    scale = np.where(old > 0, masses / np.where(old > 0, old, 1.0), 1.0)
    state.w = state.w * scale[:, None]
    state.w_star = state.w_star * scale
    return masses


def mh_update_c(state: DynamicLatentState, rng: np.random.Generator) -> float:
    """Refresh item counts; returns the acceptance rate of the MH part.

    Surviving atoms get an independence MH move with a zero-truncated
    Poisson(φ w_t) proposal. Atoms that die at t+1 take the two-state draw
    c ∈ {0, 1}. Dead atoms keep c = 0.
    """
    if state.c.size == 0:
        return 1.0
    w_t, w_n = state.w[:-1], state.w[1:]
    phi = state.phi[:, None]
    beta = np.broadcast_to(state.tau + phi, w_t.shape)
    lam = phi * w_t
    phi_b = np.broadcast_to(phi, w_t.shape)

    surviving = (w_t > 0) & (w_n > 0)
    accepted = 0
    if np.any(surviving):
        current = state.c[surviving]
        proposal = sample_zero_truncated_poisson(lam[surviving], rng)
        with np.errstate(invalid="ignore"):
            log_ratio = (proposal - current) * np.log(
                beta[surviving] * w_n[surviving]
            ) - (gammaln(proposal) - gammaln(current))
        accept = np.log(rng.random(proposal.shape)) < log_ratio
        state.c[surviving] = np.where(accept, proposal, current)
        accepted = int(accept.sum())

    dying = (w_t > 0) & (w_n == 0)
    if np.any(dying):
        p_zero = zero_count_probability(w_t[dying], phi_b[dying], state.tau)
        state.c[dying] = (rng.random(p_zero.shape) >= p_zero).astype(np.int64)

    state.c[w_t == 0] = 0
    n_surviving = int(surviving.sum())
    return accepted / n_surviving if n_surviving else 1.0


def sample_dead_tail(
    state: DynamicLatentState,
    data: DynamicData,
    item: int,
    rng: np.random.Generator,
    z_sums: FloatArray | None = None,
    start: int | None = None,
) -> None:
    """Jointly redraw (c_t, w_{t+1}) for every t from ``start`` on.

    ``start`` defaults to the item's last appearance. Backward tilts summarize
    the non-appearance likelihood of the future; forward draws then give
    c_t ~ Poi(φ_t w_t (τ+φ_t)/(τ+φ_t+x_{t+1})) and
    w_{t+1} ~ Gamma(c_t, τ+φ_t+x_{t+1}).
    """
    T, tau = state.n_epochs, state.tau
    start = int(data.last_seen[item]) if start is None else start
    if np.any(data.counts[start + 1 :, item] > 0):
        raise SamplerInternalError(
            f"item {data.items[item]!r} appears after epoch {start}",
            error_code="tail_has_observations",
        )
    if start >= T - 1:
        return
    S = item_z_matrix(data, state.Z)[:, item] if z_sums is None else z_sums[:, item]
    x = backward_tilts(S, state.phi, tau, stop=start + 1)
    for t in range(start, T - 1):
        beta = tau + state.phi[t]
        tilt = beta + x[t + 1]
        count = int(rng.poisson(state.phi[t] * state.w[t, item] * beta / tilt))
        state.c[t, item] = count
        state.w[t + 1, item] = rng.gamma(count, 1.0 / tilt) if count > 0 else 0.0


def sample_dead_head(
    state: DynamicLatentState,
    data: DynamicData,
    item: int,
    rng: np.random.Generator,
    z_sums: FloatArray | None = None,
    stop: int | None = None,
) -> None:
    """Mirror of `sample_dead_tail` for the epochs before the first appearance.

    Uses the reverse-time description of the transition: going backwards from
    ``stop`` (default: first appearance),
    c_t ~ Poi(φ_t w_{t+1} (τ+φ_t)/(τ+φ_t+x_t)) and w_t ~ Gamma(c_t, τ+φ_t+x_t).
    """
    tau = state.tau
    stop = int(data.first_seen[item]) if stop is None else stop
    if np.any(data.counts[:stop, item] > 0):
        raise SamplerInternalError(
            f"item {data.items[item]!r} appears before epoch {stop}",
            error_code="head_has_observations",
        )
    if stop == 0:
        return
    S = item_z_matrix(data, state.Z)[:, item] if z_sums is None else z_sums[:, item]
    x = forward_tilts(S, state.phi, tau, stop)
    for t in range(stop - 1, -1, -1):
        beta = tau + state.phi[t]
        tilt = beta + x[t]
        count = int(rng.poisson(state.phi[t] * state.w[t + 1, item] * beta / tilt))
        state.c[t, item] = count
        state.w[t, item] = rng.gamma(count, 1.0 / tilt) if count > 0 else 0.0


def _remainder_tilts(
    state: DynamicLatentState, z_totals: FloatArray
) -> tuple[FloatArray, FloatArray]:
    """x_t and y_t of the lumped remainder chain."""
    T, tau = state.n_epochs, state.tau
    x = backward_tilts(z_totals, state.phi, tau)
    y = np.zeros(T)
    for t in range(T - 2, -1, -1):
        y[t] = y[t + 1] + math.log1p(x[t + 1] / (tau + state.phi[t]))
    return x, y


def update_alpha_dynamic(
    state: DynamicLatentState,
    data: DynamicData,
    config: DynamicConfig,
    rng: np.random.Generator,
    z_totals: FloatArray | None = None,
) -> float:
    """α ~ Gamma(a + K, b + y_0 + log(1 + x_0/τ)), remainder integrated out."""
    z_totals = state.z_totals() if z_totals is None else z_totals
    x, y = _remainder_tilts(state, z_totals)
    shape = config.alpha_prior.shape + data.n_items
    rate = config.alpha_prior.rate + y[0] + math.log1p(x[0] / state.tau)
    if not (shape > 0 and rate > 0):
        raise ConfigurationError(
            "alpha posterior is improper; use a proper alpha prior "
            "when no items are observed",
            error_code="improper_alpha_posterior",
            details={"shape": shape, "rate": rate},
        )
    state.alpha = float(rng.gamma(shape, 1.0 / rate))
    return state.alpha


def update_cstar_wstar(
    state: DynamicLatentState,
    rng: np.random.Generator,
    z_totals: FloatArray | None = None,
) -> None:
    """Redraw the remainder chain (w_{t*}, c_{t*}) by backward tilts, forward draws."""
    z_totals = state.z_totals() if z_totals is None else z_totals
    tau, T = state.tau, state.n_epochs
    x, _ = _remainder_tilts(state, z_totals)
    w_star = np.empty(T)
    c_star = np.zeros(T - 1, dtype=np.int64)
    w_star[0] = rng.gamma(state.alpha, 1.0 / (tau + x[0]))
    for t in range(1, T):
        beta = tau + state.phi[t - 1]
        tilt = beta + x[t]
        c_star[t - 1] = rng.poisson(state.phi[t - 1] * w_star[t - 1] * beta / tilt)
        w_star[t] = rng.gamma(state.alpha + c_star[t - 1], 1.0 / tilt)
    state.w_star = w_star
    state.c_star = c_star


def update_weights_dynamic(
    state: DynamicLatentState,
    data: DynamicData,
    rng: np.random.Generator,
    z_sums: FloatArray | None = None,
) -> FloatArray:
    """w_{tk} ~ Gamma(n + c_{t-1} + c_t, τ + φ_{t-1} + φ_t + Σ δ Z), 0 at shape 0.

    Boundary epochs carry one φ coupling; the remainder uses shape
    α + c_{t-1*} + c_{t*} and the rate with ΣZ_t.
    """
    T, tau = state.n_epochs, state.tau
    z_sums = item_z_matrix(data, state.Z) if z_sums is None else z_sums
    phi_prev, phi_next = _neighbour_phis(state.phi, T)

    c_prev = np.zeros_like(data.counts)
    c_next = np.zeros_like(data.counts)
    c_prev[1:] = state.c
    c_next[:-1] = state.c
    shape = (data.counts + c_prev + c_next).astype(float)
    rate = tau + phi_prev[:, None] + phi_next[:, None] + z_sums
    state.w = np.where(shape > 0, rng.gamma(shape, 1.0 / rate), 0.0)

    cs_prev = np.zeros(T)
    cs_next = np.zeros(T)
    cs_prev[1:] = state.c_star
    cs_next[:-1] = state.c_star
    star_rate = tau + phi_prev + phi_next + state.z_totals()
    state.w_star = rng.gamma(state.alpha + cs_prev + cs_next, 1.0 / star_rate)
    return state.w


def update_Z_dynamic(
    state: DynamicLatentState, data: DynamicData, rng: np.random.Generator
) -> list[FloatArray]:
    """Z_{ti} ~ Exp(w_{t*} + Σ_k δ_{tik} w_{tk})."""
    for t, stats in enumerate(data.stats):
        if stats.n_slots == 0:
            continue
        w_t = state.w[t]
        rate = state.w_star[t] + w_t.sum() - chosen_before(stats, w_t)
        state.Z[t] = rng.exponential(1.0 / rate)
    return state.Z


def log_transition_density(state: DynamicLatentState, phi: FloatArray) -> float:
    """log p(w_{1:T}, w_{1:T*} | w_0, α, φ) with every count marginalized.

    Survivors use the Poisson-Gamma series, deaths e^{−φ w_t}, births the
    innovation intensity α w⁻¹ e^{−(τ+φ)w}.
    """
    if state.c.size == 0 and state.c_star.size == 0:
        return 0.0
    tau = state.tau
    w_t, w_n = state.w[:-1], state.w[1:]
    ph = phi[:, None]
    beta = np.broadcast_to(tau + ph, w_t.shape)
    lam = np.broadcast_to(ph, w_t.shape) * w_t

    surviving = (w_t > 0) & (w_n > 0)
    total = float(
        log_count_marginal(
            lam[surviving], 0.0, beta[surviving], w_n[surviving], c_min=1
        ).sum()
    )
    dying = (w_t > 0) & (w_n == 0)
    total -= float(lam[dying].sum())
    born = (w_t == 0) & (w_n > 0)
    if np.any(born):
        wb = w_n[born]
        total += float(np.sum(math.log(state.alpha) - np.log(wb) - beta[born] * wb))

    total += float(
        log_count_marginal(
            phi * state.w_star[:-1],
            state.alpha,
            tau + phi,
            state.w_star[1:],
            c_min=0,
        ).sum()
    )
    return total


def refresh_counts(state: DynamicLatentState, rng: np.random.Generator) -> None:
    """Exact draws of c and c_* given all weights, α and φ."""
    if state.c_star.size == 0:
        return
    tau = state.tau
    w_t, w_n = state.w[:-1], state.w[1:]
    ph = np.broadcast_to(state.phi[:, None], w_t.shape)
    surviving = (w_t > 0) & (w_n > 0)
    c = np.zeros_like(state.c)
    c[surviving] = sample_counts_exact(
        ph[surviving] * w_t[surviving],
        0.0,
        tau + ph[surviving],
        w_n[surviving],
        c_min=1,
        rng=rng,
    )
    state.c = c
    state.c_star = sample_counts_exact(
        state.phi * state.w_star[:-1],
        state.alpha,
        tau + state.phi,
        state.w_star[1:],
        c_min=0,
        rng=rng,
    )


def mh_update_phi(
    state: DynamicLatentState,
    config: DynamicConfig,
    rng: np.random.Generator,
    sigma: float | None = None,
) -> bool:
    """Log-normal random-walk MH on φ (or on ξ in continuous mode).

    The target marginalizes the counts; after an accepted move the counts
    are redrawn from their exact conditional. Returns whether the move was
    accepted.
    """
    if config.phi_mode == "fixed" or state.n_epochs < 2:
        return False
    sigma = config.mh_sigma if sigma is None else sigma
    step = math.exp(sigma * rng.standard_normal())
    if config.phi_mode == "continuous":
        current = state.xi if state.xi is not None else config.xi
        proposed = current * step
        phi_new = phi_schedule(state.tau, proposed, state.gaps)
    else:
        current = float(state.phi[0])
        proposed = current * step
        phi_new = np.full(state.n_epochs - 1, proposed)

    prior = config.phi_prior
    log_ratio = (
        prior.log_density(proposed)
        - prior.log_density(current)
        + math.log(proposed / current)
        + log_transition_density(state, phi_new)
        - log_transition_density(state, state.phi)
    )
    if not math.log(rng.random()) < log_ratio:
        return False
    state.phi = phi_new
    if config.phi_mode == "continuous":
        state.xi = proposed
    refresh_counts(state, rng)
    return True


def dynamic_sweep(
    state: DynamicLatentState,
    data: DynamicData,
    config: DynamicConfig,
    rng: np.random.Generator,
    sigma: float | None = None,
) -> tuple[float, bool]:
    """One full sweep; returns (count acceptance rate, φ accepted)."""
    if config.resample_total_masses:
        update_total_masses_and_rescale(state, rng)
    c_rate = mh_update_c(state, rng)
    z_sums = item_z_matrix(data, state.Z)
    for k in range(data.n_items):
        sample_dead_tail(state, data, k, rng, z_sums=z_sums)
        if not config.first_appearance_filter:
            sample_dead_head(state, data, k, rng, z_sums=z_sums)
    z_totals = state.z_totals()
    update_alpha_dynamic(state, data, config, rng, z_totals=z_totals)
    update_cstar_wstar(state, rng, z_totals=z_totals)
    update_weights_dynamic(state, data, rng, z_sums=z_sums)
    update_Z_dynamic(state, data, rng)
    accepted = mh_update_phi(state, config, rng, sigma)
    if config.check_invariants:
        validate_dynamic_state(state, data)
    return c_rate, accepted


def run_dynamic_gibbs(
    epochs: Sequence[Iterable[PartialRanking | Sequence[ItemId]]],
    config: DynamicConfig,
    rng: np.random.Generator,
) -> PosteriorChain:
    """Run one chain over per-epoch lists (an epoch may hold no lists)."""
    data = prepare_dynamic_data(epochs)
    state = initial_dynamic_state(data, config, rng)
    T, K = data.n_epochs, data.n_items

    n_draws = config.n_recorded
    weights = np.empty((n_draws, T, K))
    w_star = np.empty((n_draws, T))
    alpha = np.empty(n_draws)
    phi = np.empty((n_draws, T - 1))
    xi = np.empty(n_draws) if config.phi_mode == "continuous" else None
    sweeps = np.empty(n_draws, dtype=np.int64)

    logger.info(
        "dynamic chain: %d epochs, %d items, phi mode %s, %d sweeps",
        T,
        K,
        config.phi_mode,
        config.iterations,
    )
    sigma = config.mh_sigma
    batch_accepts = 0
    n_batches = 0
    phi_accepts = 0
    c_rates: list[float] = []
    d = 0
    for sweep in range(config.iterations):
        c_rate, accepted = dynamic_sweep(state, data, config, rng, sigma)
        c_rates.append(c_rate)
        if sweep < config.burn_in:
            batch_accepts += accepted
            if config.adapt_mh_sigma and (sweep + 1) % _ADAPT_BATCH == 0:
                n_batches += 1
                delta = min(0.05, 1.0 / math.sqrt(n_batches))
                rate = batch_accepts / _ADAPT_BATCH
                sigma *= math.exp(delta if rate > config.target_acceptance else -delta)
                batch_accepts = 0
        else:
            phi_accepts += accepted

        if config.is_recorded(sweep):
            weights[d] = state.w
            w_star[d] = state.w_star
            alpha[d] = state.alpha
            phi[d] = state.phi
            if xi is not None:
                xi[d] = state.xi
            sweeps[d] = sweep
            d += 1
        if (sweep + 1) % config.log_every == 0:
            logger.debug(
                "sweep %d: alpha=%.4g phi[0]=%s sigma=%.3g",
                sweep + 1,
                state.alpha,
                f"{state.phi[0]:.4g}" if T > 1 else "-",
                sigma,
            )

    kept = config.iterations - config.burn_in
    acceptance = {
        "c": float(np.mean(c_rates)) if c_rates else 1.0,
        "phi": phi_accepts / kept if config.phi_mode != "fixed" and T > 1 else 0.0,
        "mh_sigma": sigma,
    }
    logger.info(
        "dynamic chain done: c acceptance %.3f, phi acceptance %.3f",
        acceptance["c"],
        acceptance["phi"],
    )
    return PosteriorChain(
        model="dynamic",
        items=data.items,
        sweeps=sweeps,
        weights=weights,
        w_star=w_star,
        alpha=alpha,
        phi=phi,
        xi=xi,
        acceptance=acceptance,
    )


# ---- Synthetic data ---------------------------------------------------------


@dataclass(frozen=True)
class DynamicGroundTruth:
    """Measures behind a simulated dataset, one per epoch."""

    params: GammaProcessParams
    phis: tuple[float, ...]
    measures: tuple[AtomicMeasure, ...]

    def normalized_weights(self, epoch: int) -> dict[ItemId, float]:
        return self.measures[epoch].normalized()

    def rank_agreement(self, chain: PosteriorChain) -> FloatArray:
        """Kendall τ per epoch between posterior-mean and true normalized weights.

        Only items the chain tracks and the truth holds alive at that epoch
        count; epochs with fewer than two such items give nan.
        """
        means = chain.normalized_weights()[..., :-1].mean(axis=0)
        taus = np.full(len(self.measures), np.nan)
        for t in range(len(self.measures)):
            truth = self.normalized_weights(t)
            alive = [k for k, item in enumerate(chain.items) if item in truth]
            if len(alive) < 2:
                continue
            true = [truth[chain.items[k]] for k in alive]
            taus[t] = sps.kendalltau(means[t, alive], true).statistic
        return taus

    def to_json_dict(self) -> dict[str, object]:
        return {
            "alpha": self.params.alpha,
            "tau": self.params.tau,
            "phi": list(self.phis),
            "epochs": [
                {
                    "epoch": t,
                    "weights": dict(m.atoms),
                    "remainder_mass": m.remainder_mass,
                    "total_mass": m.total_mass,
                }
                for t, m in enumerate(self.measures)
            ],
        }


def simulate_dynamic_dataset(
    config: SimulationConfig,
    params: GammaProcessParams,
    rng: np.random.Generator,
    label_prefix: str = "item-",
) -> tuple[list[list[PartialRanking]], DynamicGroundTruth]:
    """Forward-simulate G_1..G_T and draw ``lists_per_epoch`` top-m lists each epoch.

    φ is constant unless ``config.xi`` is set, in which case every transition
    uses the continuous-time mapping with ``config.gaps`` (default 1).
    """
    T = config.epochs
    if config.xi is not None:
        gaps = config.gaps or (1.0,) * (T - 1)
        phis = tuple(float(p) for p in phi_schedule(params.tau, config.xi, gaps))
    else:
        phis = (config.phi,) * (T - 1)

    measure = AtomicMeasure(
        remainder_mass=float(rng.gamma(params.alpha, 1.0 / params.tau)),
        label_prefix=label_prefix,
    )
    epochs: list[list[PartialRanking]] = []
    measures: list[AtomicMeasure] = []
    for t in range(T):
        lists: list[PartialRanking] = []
        for _ in range(config.lists_per_epoch):
            ranking, measure = sample_top_m(
                params, measure, config.list_length, rng, epoch=t
            )
            lists.append(ranking)
        epochs.append(lists)
        measures.append(measure)
        if t < T - 1:
            _, measure = pitt_walker_step(measure, params, phis[t], rng)
    logger.info("simulated %d epochs, %d distinct items", T, _distinct(epochs))
    return epochs, DynamicGroundTruth(params, phis, tuple(measures))


def _distinct(epochs: Sequence[Sequence[PartialRanking]]) -> int:
    return len({item for lists in epochs for r in lists for item in r.items})
