"""Reference computations and statistical harnesses for the samplers.

The references here share no sampling code with the model modules: closed
forms are recomputed, gamma processes are drawn by a separate batched
stick-breaker and lists come from an exponential race over instantiated atoms.
The model modules are called only for the quantity under test.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats as sps
from scipy.integrate import quad
from scipy.special import gammaln

from bnpl import dynamic_model, static_model
from bnpl.config import ChainConfig, DynamicConfig, GammaPrior
from bnpl.errors import ConfigurationError, DomainError
from bnpl.measures import AtomicMeasure, levy_kappa, levy_psi
from bnpl.models import (
    CheckResult,
    DiagnosticReport,
    GammaProcessParams,
    GewekeReport,
    GewekeStatistic,
    ItemId,
    PartialRanking,
    PosteriorChain,
)

logger = logging.getLogger(__name__)

Z_THRESHOLD = 4.0
MC_THRESHOLD = 3.0
KS_LEVEL = 0.01


def _z_score(diff: float, se: float) -> float:
    if se > 0:
        return diff / se
    return 0.0 if diff == 0 else math.copysign(1e12, diff)


def _items_of(r: PartialRanking | Sequence[ItemId]) -> tuple[ItemId, ...]:
    return r.items if isinstance(r, PartialRanking) else tuple(r)


# ---- Lévy functionals by quadrature ----------------------------------------


def quad_psi(params: GammaProcessParams, z: float) -> float:
    """∫ α w⁻¹ e^{−τw} (1 − e^{−zw}) dw by adaptive quadrature."""

    def integrand(w: float) -> float:
        return params.alpha * math.exp(-params.tau * w) * -math.expm1(-z * w) / w

    value, _ = quad(integrand, 0.0, math.inf, epsabs=0.0, epsrel=1e-11, limit=200)
    return value


def quad_kappa(params: GammaProcessParams, n: int, z: float) -> float:
    """∫ α w^{n−1} e^{−(τ+z)w} dw by adaptive quadrature."""

    def integrand(w: float) -> float:
        return params.alpha * w ** (n - 1) * math.exp(-(params.tau + z) * w)

    value, _ = quad(integrand, 0.0, math.inf, epsabs=0.0, epsrel=1e-11, limit=200)
    return value


def psi_kappa_check(
    alphas: Sequence[float] = (0.3, 1.0, 2.0, 5.0, 10.0),
    taus: Sequence[float] = (0.5, 1.0, 2.0, 4.0, 8.0),
    zs: Sequence[float] = (0.0, 0.1, 1.0, 10.0),
    ns: Sequence[int] = (1, 2, 3, 4),
    tolerance: float = 1e-6,
) -> list[CheckResult]:
    """Largest relative error of ψ and κ against quadrature over a grid."""
    psi_err = 0.0
    kappa_err = 0.0
    for alpha, tau, z in itertools.product(alphas, taus, zs):
        params = GammaProcessParams(alpha, tau)
        exact = levy_psi(params, z)
        numeric = quad_psi(params, z)
        psi_err = max(psi_err, abs(exact - numeric) / max(abs(numeric), 1e-300))
        for n in ns:
            exact = levy_kappa(params, n, z)
            numeric = quad_kappa(params, n, z)
            kappa_err = max(kappa_err, abs(exact - numeric) / abs(numeric))
    grid = len(alphas) * len(taus) * len(zs)
    return [
        CheckResult(
            name="psi",
            estimate=psi_err,
            reference=0.0,
            statistic=psi_err,
            passed=psi_err < tolerance,
            details={"grid_points": grid},
        ),
        CheckResult(
            name="kappa",
            estimate=kappa_err,
            reference=0.0,
            statistic=kappa_err,
            passed=kappa_err < tolerance,
            details={"grid_points": grid * len(ns)},
        ),
    ]


# ---- Exhaustive list probabilities -----------------------------------------


def enumerate_topm_distribution(
    weights: Mapping[ItemId, float] | Sequence[float],
    m: int,
    remainder: float = 0.0,
) -> dict[tuple[ItemId | int, ...], float]:
    """Probability of every ordered m-subset of the named items.

    Sequences are labelled 1..M. With a positive remainder only orderings of
    named items are listed, so the values sum to less than one.
    """
    if isinstance(weights, Mapping):
        labels: list[ItemId | int] = list(weights)
        values = [float(weights[k]) for k in weights]
    else:
        values = [float(v) for v in weights]
        labels = list(range(1, len(values) + 1))
    M = len(values)
    if M > 8:
        raise DomainError(f"enumeration is limited to 8 items, got {M}")
    if not 1 <= m <= M:
        raise DomainError(f"need 1 <= m <= {M}, got m={m}")
    if any(v <= 0 for v in values) or remainder < 0:
        raise DomainError("weights must be positive and remainder non-negative")

    total = sum(values) + remainder
    out: dict[tuple[ItemId | int, ...], float] = {}
    for perm in itertools.permutations(range(M), m):
        p = 1.0
        left = total
        for j in perm:
            p *= values[j] / left
            left -= values[j]
        out[tuple(labels[j] for j in perm)] = p
    return out


def enumeration_check(
    rng: np.random.Generator,
    max_items: int = 6,
    fixtures_per_size: int = 3,
) -> list[CheckResult]:
    """Enumerated list laws sum to one and agree with `pl_log_probability`."""
    worst_sum = 0.0
    worst_pl = 0.0
    n_fixtures = 0
    for M in range(1, max_items + 1):
        for _ in range(fixtures_per_size):
            weights = {f"i{j}": float(w) for j, w in enumerate(rng.gamma(1.0, 1.0, M))}
            for m in range(1, M + 1):
                dist = enumerate_topm_distribution(weights, m)
                worst_sum = max(worst_sum, abs(math.fsum(dist.values()) - 1.0))
                for ordering, p in dist.items():
                    log_pl = static_model.pl_log_probability(weights, 0.0, ordering)
                    pl = math.exp(log_pl)
                    worst_pl = max(worst_pl, abs(pl - p))
                n_fixtures += 1
    return [
        CheckResult(
            name="sum_to_one",
            estimate=worst_sum,
            reference=0.0,
            statistic=worst_sum,
            passed=worst_sum <= 1e-10,
            details={"fixtures": n_fixtures},
        ),
        CheckResult(
            name="pl_agreement",
            estimate=worst_pl,
            reference=0.0,
            statistic=worst_pl,
            passed=worst_pl <= 1e-12,
            details={"fixtures": n_fixtures},
        ),
    ]


# ---- Finite-M reference sampler --------------------------------------------


def finite_gibbs(
    rankings: Sequence[PartialRanking | Sequence[ItemId]],
    M: int,
    alpha: float,
    tau: float,
    config: ChainConfig,
    rng: np.random.Generator,
) -> PosteriorChain:
    """Gibbs sampler of the M-item model with Gamma(α/M, τ) weights.

    ``w_star`` records the summed weight of the M − K items never listed.
    """
    lists = [_items_of(r) for r in rankings]
    observed = list(dict.fromkeys(item for items in lists for item in items))
    K = len(observed)
    if M < K:
        raise DomainError(f"M={M} is below the {K} observed items")
    index = {item: k for k, item in enumerate(observed)}
    counts = np.zeros(K)
    for items in lists:
        for item in items:
            counts[index[item]] += 1

    share = alpha / M
    w = (counts + share) / tau
    hidden = np.full(M - K, share / tau)

    n_draws = config.n_recorded
    weights = np.empty((n_draws, 1, K))
    w_star = np.empty((n_draws, 1))
    sweeps = np.empty(n_draws, dtype=np.int64)
    d = 0
    for sweep in range(config.iterations):
        total = w.sum() + hidden.sum()
        z_item = np.zeros(K)
        z_all = 0.0
        for items in lists:
            listed = 0.0
            ahead: list[int] = []
            for item in items:
                z = rng.exponential(1.0 / (total - listed))
                z_item += z
                z_item[ahead] -= z
                z_all += z
                k = index[item]
                ahead.append(k)
                listed += w[k]
        w = rng.gamma(share + counts, 1.0 / (tau + z_item))
        hidden = rng.gamma(share, 1.0 / (tau + z_all), size=M - K)
        if config.is_recorded(sweep):
            weights[d, 0] = w
            w_star[d, 0] = hidden.sum()
            sweeps[d] = sweep
            d += 1

    return PosteriorChain(
        model="finite",
        items=tuple(observed),
        sweeps=sweeps,
        weights=weights,
        w_star=w_star,
        alpha=np.full(n_draws, alpha),
        phi=np.zeros((n_draws, 0)),
    )


# ---- Gamma-process draws for Monte Carlo references -------------------------


def _batched_sticks(
    alpha: float,
    tau: float,
    size: int,
    epsilon: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Total masses and zero-padded atom weights of ``size`` truncated draws."""
    totals = rng.gamma(alpha, 1.0 / tau, size)
    left = np.ones(size)
    pieces: list[np.ndarray] = []
    while True:
        active = left > epsilon
        if not active.any():
            break
        v = rng.beta(1.0, alpha, size)
        piece = np.where(active, v * left, 0.0)
        left = left - piece
        pieces.append(piece)
    atoms = np.stack(pieces, axis=1) if pieces else np.zeros((size, 0))
    return totals, atoms * totals[:, None]


def _stick_atoms(
    alpha: float,
    tau: float,
    epsilon: float,
    rng: np.random.Generator,
    min_atoms: int = 1,
) -> list[float]:
    """One finite measure; the residual below ``epsilon`` becomes a last atom."""
    total = rng.gamma(alpha, 1.0 / tau)
    atoms: list[float] = []
    left = 1.0
    while left > epsilon or len(atoms) < min_atoms:
        piece = rng.beta(1.0, alpha) * left
        left -= piece
        if piece * total > 0:
            atoms.append(piece * total)
    if left * total > 0:
        atoms.append(left * total)
    return atoms


def _race(
    weights: np.ndarray, m: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """First ``m`` arrivals of independent Exp(w) clocks and the gaps between them."""
    arrivals = rng.exponential(1.0 / weights)
    order = np.argsort(arrivals)[:m]
    times = arrivals[order]
    return order, np.diff(times, prepend=0.0)


# ---- Marginal likelihood by Monte Carlo ------------------------------------


def marginal_check(
    rankings: Sequence[PartialRanking | Sequence[ItemId]],
    Z: Sequence[Sequence[float]],
    params: GammaProcessParams,
    n_mc: int,
    rng: np.random.Generator,
    epsilon: float = 1e-8,
    batch_size: int = 100_000,
) -> CheckResult:
    """Monte Carlo average of the weight likelihood against its closed form.

    For each truncated draw the likelihood is summed over assignments of the
    observed items to distinct atoms (K ≤ 2); base-density factors are left
    out on both sides.
    """
    lists = [_items_of(r) for r in rankings]
    if len(lists) != len(Z) or any(
        len(items) != len(z) for items, z in zip(lists, Z, strict=True)
    ):
        raise DomainError("Z must have one value per (list, rank)")
    observed = list(dict.fromkeys(item for items in lists for item in items))
    K = len(observed)
    if not 1 <= K <= 2:
        raise DomainError(f"marginal check supports 1 or 2 observed items, got {K}")

    n = np.zeros(K)
    D = np.zeros(K)
    sum_z = 0.0
    for items, z_list in zip(lists, Z, strict=True):
        for rank, (item, z) in enumerate(zip(items, z_list, strict=True)):
            sum_z += z
            n[observed.index(item)] += 1
            for k, other in enumerate(observed):
                if other not in items[:rank]:
                    D[k] += z

    log_closed = -params.alpha * math.log1p(sum_z / params.tau)
    for k in range(K):
        log_closed += (
            math.log(params.alpha) + gammaln(n[k]) - n[k] * math.log(D[k] + params.tau)
        )
    closed = math.exp(log_closed)

    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_mc:
        size = min(batch_size, n_mc - done)
        masses, atoms = _batched_sticks(params.alpha, params.tau, size, epsilon, rng)
        base = np.exp(-sum_z * masses)
        a = [atoms ** n[k] * np.exp((sum_z - D[k]) * atoms) for k in range(K)]
        if K == 1:
            f = base * a[0].sum(axis=1)
        else:
            f = base * (a[0].sum(axis=1) * a[1].sum(axis=1) - (a[0] * a[1]).sum(axis=1))
        total += float(f.sum())
        total_sq += float((f * f).sum())
        done += size

    mean = total / n_mc
    var = max(total_sq / n_mc - mean * mean, 0.0) * n_mc / max(n_mc - 1, 1)
    se = math.sqrt(var / n_mc)
    z = _z_score(mean - closed, se)
    return CheckResult(
        name=f"marginal_K{K}",
        estimate=mean,
        reference=closed,
        statistic=z,
        passed=abs(z) < MC_THRESHOLD,
        details={"n_mc": n_mc, "standard_error": se, "epsilon": epsilon},
    )


# ---- Dynamic-model references ----------------------------------------------


def lifetime_check(
    w: float,
    phi: float,
    tau: float,
    t_horizon: int,
    n_paths: int,
    rng: np.random.Generator,
) -> CheckResult:
    """Death frequency of simulated single-atom paths against the closed form."""
    mass = np.full(n_paths, float(w))
    for _ in range(t_horizon - 1):
        c = rng.poisson(phi * mass)
        mass = np.where(c > 0, rng.gamma(np.maximum(c, 1), 1.0 / (tau + phi)), 0.0)
    freq = float(np.mean(mass == 0.0))
    ref = dynamic_model.lifetime_death_prob(w, phi, tau, t_horizon)
    se = math.sqrt(ref * (1.0 - ref) / n_paths)
    z = _z_score(freq - ref, se)
    return CheckResult(
        name=f"lifetime_t{t_horizon}_phi{phi:g}_w{w:g}",
        estimate=freq,
        reference=ref,
        statistic=z,
        passed=abs(z) < MC_THRESHOLD,
        details={"n_paths": n_paths, "tau": tau},
    )


def stationarity_check(
    params: GammaProcessParams,
    phi: float,
    n_paths: int,
    n_steps: int,
    rng: np.random.Generator,
) -> CheckResult:
    """KS test of total masses after ``n_steps`` Pitt-Walker steps vs Gamma(α, τ).

    Paths start from an un-instantiated Gamma(α, τ) measure and are independent.
    """
    finals = np.empty(n_paths)
    for j in range(n_paths):
        measure = AtomicMeasure(
            remainder_mass=float(rng.gamma(params.alpha, 1.0 / params.tau))
        )
        for _ in range(n_steps):
            _, measure = dynamic_model.pitt_walker_step(measure, params, phi, rng)
        finals[j] = measure.total_mass
    result = sps.kstest(finals, "gamma", args=(params.alpha, 0.0, 1.0 / params.tau))
    return CheckResult(
        name=f"stationarity_alpha{params.alpha:g}_phi{phi:g}",
        estimate=float(finals.mean()),
        reference=params.alpha / params.tau,
        statistic=float(result.pvalue),
        passed=bool(result.pvalue > KS_LEVEL),
        details={"n_paths": n_paths, "n_steps": n_steps},
    )


def stationarity_chain_check(
    params: GammaProcessParams,
    phi: float,
    n_steps: int,
    rng: np.random.Generator,
) -> CheckResult:
    """KS test of one long Pitt-Walker path of total masses vs Gamma(α, τ).

    Total masses have lag-one correlation φ/(τ+φ); the path is thinned to the
    lag where that correlation falls below 0.01.
    """
    rho = phi / (params.tau + phi)
    lag = max(1, math.ceil(math.log(0.01) / math.log(rho)))
    measure = AtomicMeasure(
        remainder_mass=float(rng.gamma(params.alpha, 1.0 / params.tau))
    )
    path = np.empty(n_steps)
    for t in range(n_steps):
        _, measure = dynamic_model.pitt_walker_step(measure, params, phi, rng)
        path[t] = measure.total_mass
    kept = path[lag - 1 :: lag]
    result = sps.kstest(kept, "gamma", args=(params.alpha, 0.0, 1.0 / params.tau))
    return CheckResult(
        name=f"stationary_path_alpha{params.alpha:g}_phi{phi:g}",
        estimate=float(path.mean()),
        reference=params.alpha / params.tau,
        statistic=float(result.pvalue),
        passed=bool(result.pvalue > KS_LEVEL),
        details={"n_steps": n_steps, "lag": lag, "n_kept": int(kept.size)},
    )


def next_mass_check(
    measure: AtomicMeasure,
    params: GammaProcessParams,
    phi: float,
    n_paths: int,
    rng: np.random.Generator,
) -> CheckResult:
    """Mean total mass one step ahead against (φ G + α)/(τ + φ)."""
    nxt = np.array(
        [
            dynamic_model.pitt_walker_step(measure, params, phi, rng)[1].total_mass
            for _ in range(n_paths)
        ]
    )
    ref = (phi * measure.total_mass + params.alpha) / (params.tau + phi)
    z = _z_score(float(nxt.mean()) - ref, float(nxt.std(ddof=1)) / math.sqrt(n_paths))
    return CheckResult(
        name="expected_next_mass",
        estimate=float(nxt.mean()),
        reference=ref,
        statistic=z,
        passed=abs(z) < MC_THRESHOLD,
        details={"n_paths": n_paths},
    )


def _total_mass_step(
    masses: np.ndarray, alpha: float, tau: float, phi: float, rng: np.random.Generator
) -> np.ndarray:
    counts = rng.poisson(phi * masses)
    return rng.gamma(alpha + counts, 1.0 / (tau + phi))


def chapman_kolmogorov_check(
    params: GammaProcessParams,
    xi: float,
    dt: float,
    start_mass: float,
    n_paths: int,
    rng: np.random.Generator,
) -> CheckResult:
    """Two Δt transitions against one 2Δt transition, two-sample KS."""
    phi_one = dynamic_model.phi_from_continuous_time(params.tau, xi, dt)
    phi_two = dynamic_model.phi_from_continuous_time(params.tau, xi, 2 * dt)
    start = np.full(n_paths, start_mass)
    composed = _total_mass_step(
        _total_mass_step(start, params.alpha, params.tau, phi_one, rng),
        params.alpha,
        params.tau,
        phi_one,
        rng,
    )
    direct = _total_mass_step(start, params.alpha, params.tau, phi_two, rng)
    result = sps.ks_2samp(composed, direct)
    return CheckResult(
        name=f"chapman_kolmogorov_dt{dt:g}",
        estimate=float(composed.mean()),
        reference=float(direct.mean()),
        statistic=float(result.pvalue),
        passed=bool(result.pvalue > KS_LEVEL),
        details={"n_paths": n_paths, "phi_dt": phi_one, "phi_2dt": phi_two},
    )


def reversibility_check(
    params: GammaProcessParams,
    phi: float,
    n_paths: int,
    rng: np.random.Generator,
) -> CheckResult:
    """E[G_t G_{t+1}² − G_t² G_{t+1}] = 0 for stationary consecutive pairs."""
    first = rng.gamma(params.alpha, 1.0 / params.tau, n_paths)
    second = _total_mass_step(first, params.alpha, params.tau, phi, rng)
    d = first * second**2 - first**2 * second
    z = _z_score(float(d.mean()), float(d.std(ddof=1)) / math.sqrt(n_paths))
    return CheckResult(
        name=f"reversibility_phi{phi:g}",
        estimate=float(d.mean()),
        reference=0.0,
        statistic=z,
        passed=abs(z) < MC_THRESHOLD,
        details={"n_paths": n_paths},
    )


def exact_count_distribution(
    w: float, w_next: float, phi: float, tau: float, c_max: int
) -> np.ndarray:
    """P(c | w_t, w_{t+1}) for c = 1..c_max of a surviving atom."""
    cs = np.arange(1, c_max + 1)
    log_p = sps.poisson.logpmf(cs, phi * w) + sps.gamma.logpdf(
        w_next, cs, scale=1.0 / (tau + phi)
    )
    p = np.exp(log_p - log_p.max())
    return p / p.sum()


# ---- Geweke harness ---------------------------------------------------------


class GewekeShape(BaseModel):
    """Size of the miniature instance and the proper priors it is drawn from."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_lists: int = Field(default=3, ge=0, description="Static lists")
    epochs: int = Field(default=3, ge=1, description="Dynamic epochs")
    lists_per_epoch: int = Field(default=1, ge=0)
    list_length: int = Field(default=2, ge=1)
    alpha_prior: GammaPrior = GammaPrior(shape=3.0, rate=2.0)
    phi_prior: GammaPrior = GammaPrior(shape=4.0, rate=1.0)
    tau: float = Field(default=1.0, gt=0.0)
    epsilon: float = Field(default=1e-6, gt=0.0)
    sweeps_per_replicate: int = Field(default=10, ge=1)


def _forward_static(
    shape: GewekeShape, rng: np.random.Generator
) -> tuple[float, np.ndarray, list[PartialRanking], list[np.ndarray]]:
    alpha = rng.gamma(shape.alpha_prior.shape, 1.0 / shape.alpha_prior.rate)
    atoms = np.asarray(
        _stick_atoms(alpha, shape.tau, shape.epsilon, rng, min_atoms=shape.list_length)
    )
    lists: list[PartialRanking] = []
    Z: list[np.ndarray] = []
    for _ in range(shape.n_lists):
        order, gaps = _race(atoms, shape.list_length, rng)
        lists.append(PartialRanking(tuple(str(j) for j in order)))
        Z.append(gaps)
    return float(alpha), atoms, lists, Z


def _static_state(
    alpha: float,
    atoms: np.ndarray,
    lists: list[PartialRanking],
    Z: list[np.ndarray],
    tau: float,
) -> tuple[static_model.StaticLatentState, static_model.ObservedStats]:
    stats = static_model.compute_occurrence_stats(lists)
    w = np.array([atoms[int(item)] for item in stats.unique_items])
    state = static_model.StaticLatentState(
        Z=np.concatenate(Z) if Z else np.zeros(0),
        w=w,
        w_star=float(atoms.sum() - w.sum()),
        alpha=alpha,
        tau=tau,
    )
    return state, stats


def _static_statistics(state: static_model.StaticLatentState) -> dict[str, float]:
    return {
        "sum_Z": float(state.Z.sum()),
        "w_star": state.w_star,
        "total_mass": state.total_mass,
        "alpha": state.alpha,
    }


def _forward_dynamic(
    shape: GewekeShape, rng: np.random.Generator
) -> tuple[
    float, float, list[dict[int, float]], list[dict[int, int]], list[list], list
]:
    alpha = rng.gamma(shape.alpha_prior.shape, 1.0 / shape.alpha_prior.rate)
    phi = rng.gamma(shape.phi_prior.shape, 1.0 / shape.phi_prior.rate)
    tau, eps, m = shape.tau, shape.epsilon, shape.list_length
    next_id = itertools.count()
    current = {next(next_id): w for w in _stick_atoms(alpha, tau, eps, rng, m)}
    trajectory: list[dict[int, float]] = []
    counts: list[dict[int, int]] = []
    epochs: list[list[PartialRanking]] = []
    Z: list[np.ndarray] = []
    for t in range(shape.epochs):
        ids = np.fromiter(current, dtype=np.int64)
        weights = np.fromiter(current.values(), dtype=float)
        lists: list[PartialRanking] = []
        gaps: list[np.ndarray] = []
        for _ in range(shape.lists_per_epoch):
            order, z = _race(weights, m, rng)
            lists.append(PartialRanking(tuple(str(ids[j]) for j in order), epoch=t))
            gaps.append(z)
        epochs.append(lists)
        Z.append(np.concatenate(gaps) if gaps else np.zeros(0))
        trajectory.append(dict(current))
        if t < shape.epochs - 1:
            c = {j: int(rng.poisson(phi * w)) for j, w in current.items()}
            nxt = {
                j: float(rng.gamma(cj, 1.0 / (tau + phi))) for j, cj in c.items() if cj
            }
            for w in _stick_atoms(alpha, tau + phi, eps, rng, m):
                nxt[next(next_id)] = w
            counts.append(c)
            current = nxt
    return float(alpha), float(phi), trajectory, counts, epochs, Z


def _dynamic_state(
    shape: GewekeShape, rng: np.random.Generator
) -> tuple[dynamic_model.DynamicLatentState, dynamic_model.DynamicData]:
    alpha, phi, trajectory, counts, epochs, Z = _forward_dynamic(shape, rng)
    data = dynamic_model.prepare_dynamic_data(epochs)
    ids = [int(item) for item in data.items]
    T = shape.epochs
    w = np.array([[traj.get(j, 0.0) for j in ids] for traj in trajectory])
    w = w.reshape(T, len(ids))
    totals = np.array([sum(traj.values()) for traj in trajectory])
    c = np.array([[cnt.get(j, 0) for j in ids] for cnt in counts], dtype=np.int64)
    c = c.reshape(T - 1, len(ids))
    c_all = np.array([sum(cnt.values()) for cnt in counts], dtype=np.int64)
    state = dynamic_model.DynamicLatentState(
        w=w,
        w_star=totals - w.sum(axis=1),
        c=c,
        c_star=c_all - c.sum(axis=1),
        Z=Z,
        alpha=alpha,
        phi=np.full(T - 1, phi),
        tau=shape.tau,
    )
    return state, data


def _dynamic_statistics(
    state: dynamic_model.DynamicLatentState,
) -> dict[str, float]:
    masses = state.total_masses
    out = {
        "sum_Z": float(sum(float(z.sum()) for z in state.Z)),
        "total_mass_first": float(masses[0]),
        "total_mass_last": float(masses[-1]),
        "w_star_first": float(state.w_star[0]),
        "alpha": state.alpha,
    }
    if state.n_epochs > 1:
        out["phi"] = float(state.phi[0])
    return out


def _compare(
    forward: list[dict[str, float]],
    transition: list[dict[str, float]],
    threshold: float,
) -> list[GewekeStatistic]:
    out: list[GewekeStatistic] = []
    for name in forward[0]:
        a = np.array([f[name] for f in forward])
        b = np.array([t[name] for t in transition])
        se = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
        z = _z_score(float(a.mean() - b.mean()), se)
        out.append(
            GewekeStatistic(
                name=name,
                z_score=z,
                forward_mean=float(a.mean()),
                transition_mean=float(b.mean()),
                n_forward=int(a.size),
                n_transition=int(b.size),
                passed=abs(z) < threshold,
            )
        )
    return out


def geweke_test(
    model: str,
    shape: GewekeShape,
    n_sweeps: int,
    rng: np.random.Generator,
    threshold: float = Z_THRESHOLD,
) -> GewekeReport:
    """Forward joint draws against draws moved by the Gibbs kernel.

    Every replicate draws (parameters, atoms, lists, Z) forward, then applies
    ``shape.sweeps_per_replicate`` sweeps of the model's kernel with the data
    held fixed. If the kernel leaves the joint invariant the moved draws have
    the forward law; a second, independent set of forward draws is the
    reference. ``n_sweeps`` is the total kernel budget.
    """
    if model not in ("static", "dynamic"):
        raise DomainError(f"unknown model {model!r}")
    if shape.alpha_prior.is_improper or (
        model == "dynamic" and shape.phi_prior.is_improper
    ):
        raise ConfigurationError(
            "forward simulation needs proper priors", error_code="improper_prior"
        )
    n_rep = max(n_sweeps // shape.sweeps_per_replicate, 2)
    forward: list[dict[str, float]] = []
    transition: list[dict[str, float]] = []

    if model == "static":
        config = ChainConfig(
            iterations=2, burn_in=0, alpha_prior=shape.alpha_prior, tau=shape.tau
        )
        for _ in range(n_rep):
            state, _ = _static_state(*_forward_static(shape, rng), tau=shape.tau)
            forward.append(_static_statistics(state))
            state, stats = _static_state(*_forward_static(shape, rng), tau=shape.tau)
            for _ in range(shape.sweeps_per_replicate):
                static_model.gibbs_sweep(state, stats, config, rng)
            transition.append(_static_statistics(state))
    else:
        dyn_config = DynamicConfig(
            iterations=2,
            burn_in=0,
            alpha_prior=shape.alpha_prior,
            phi_prior=shape.phi_prior,
            tau=shape.tau,
            phi_mode="inferred" if shape.epochs > 1 else "fixed",
            mh_sigma=0.5,
            adapt_mh_sigma=False,
            first_appearance_filter=False,
            resample_total_masses=False,
            check_invariants=True,
        )
        for _ in range(n_rep):
            state, _ = _dynamic_state(shape, rng)
            forward.append(_dynamic_statistics(state))
            state, data = _dynamic_state(shape, rng)
            for _ in range(shape.sweeps_per_replicate):
                dynamic_model.dynamic_sweep(state, data, dyn_config, rng)
            transition.append(_dynamic_statistics(state))

    report = GewekeReport(
        model=model,  # type: ignore[arg-type]
        threshold=threshold,
        statistics=_compare(forward, transition, threshold),
    )
    logger.info(
        "geweke %s: max |z| = %.2f over %d replicates",
        model,
        report.max_abs_z,
        n_rep,
    )
    return report


# ---- Suites -----------------------------------------------------------------


def _suite_psi_kappa(rng: np.random.Generator, quick: bool) -> DiagnosticReport:
    return DiagnosticReport(suite="psi-kappa", checks=psi_kappa_check())


def _suite_enumerate(rng: np.random.Generator, quick: bool) -> DiagnosticReport:
    return DiagnosticReport(suite="enumerate", checks=enumeration_check(rng))


def _suite_marginal(rng: np.random.Generator, quick: bool) -> DiagnosticReport:
    n_mc = 100_000 if quick else 1_000_000
    params = GammaProcessParams(alpha=1.0, tau=1.0)
    fixtures: list[tuple[list[tuple[str, ...]], list[list[float]]]] = [
        ([("a",)], [[0.7]]),
        ([("a", "b")], [[0.4, 0.9]]),
        ([("a", "b"), ("b",)], [[0.3, 0.5], [0.8]]),
    ]
    checks = [marginal_check(r, z, params, n_mc, rng) for r, z in fixtures]
    return DiagnosticReport(suite="marginal", checks=checks)


def _suite_geweke(rng: np.random.Generator, quick: bool) -> DiagnosticReport:
    n_sweeps = 20_000 if quick else 100_000
    static = geweke_test("static", GewekeShape(n_lists=3, list_length=2), n_sweeps, rng)
    dynamic = geweke_test(
        "dynamic",
        GewekeShape(epochs=3, list_length=3),
        n_sweeps // 5 if quick else n_sweeps,
        rng,
    )
    return DiagnosticReport(suite="geweke", geweke=[static, dynamic])


def _suite_lifetime(rng: np.random.Generator, quick: bool) -> DiagnosticReport:
    n_paths = 20_000 if quick else 100_000
    settings = [(1.0, 1.0, 0.5), (2.0, 1.0, 0.7), (5.0, 2.0, 0.2)]
    checks = [
        lifetime_check(w, phi, tau, t, n_paths, rng)
        for phi, tau, w in settings
        for t in range(2, 7)
    ]
    return DiagnosticReport(suite="lifetime", checks=checks)


def _suite_stationarity(rng: np.random.Generator, quick: bool) -> DiagnosticReport:
    n_paths = 2_000 if quick else 10_000
    checks = [
        stationarity_check(GammaProcessParams(a, t), phi, n_paths, 5, rng)
        for a, t, phi in [(1.0, 1.0, 1.0), (2.0, 1.0, 10.0)]
    ]
    if not quick:
        checks.extend(
            stationarity_chain_check(GammaProcessParams(a, t), phi, 10_000, rng)
            for a, t, phi in [(1.0, 1.0, 1.0), (2.0, 1.0, 10.0)]
        )
    checks.append(
        next_mass_check(
            AtomicMeasure(atoms={"a": 1.5}, remainder_mass=0.5),
            GammaProcessParams(1.0, 1.0),
            3.0,
            n_paths,
            rng,
        )
    )
    checks.append(
        chapman_kolmogorov_check(
            GammaProcessParams(2.0, 1.0), 1.0, 0.5, 3.0, 10 * n_paths, rng
        )
    )
    checks.append(
        reversibility_check(GammaProcessParams(2.0, 1.0), 5.0, 10 * n_paths, rng)
    )
    return DiagnosticReport(suite="stationarity", checks=checks)


SUITES: dict[str, Callable[[np.random.Generator, bool], DiagnosticReport]] = {
    "psi-kappa": _suite_psi_kappa,
    "enumerate": _suite_enumerate,
    "marginal": _suite_marginal,
    "geweke": _suite_geweke,
    "lifetime": _suite_lifetime,
    "stationarity": _suite_stationarity,
}


def run_suite(
    suite: str, rng: np.random.Generator, quick: bool = False
) -> DiagnosticReport:
    """Run one named diagnostic suite."""
    try:
        runner = SUITES[suite]
    except KeyError:
        raise DomainError(
            f"unknown suite {suite!r}; choose from {', '.join(SUITES)}"
        ) from None
    logger.info("running diagnostic suite %s", suite)
    return runner(rng, quick)
