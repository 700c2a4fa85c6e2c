import math

import numpy as np
import pytest
from scipy import stats

from bnpl import static_model
from bnpl._rerun import rerun_on_failure
from bnpl.config import ChainConfig, GammaPrior
from bnpl.errors import ConfigurationError, DomainError, SamplerInternalError
from bnpl.measures import AtomicMeasure, sample_top_m
from bnpl.models import GammaProcessParams, PartialRanking
from bnpl.oracle import GewekeShape, geweke_test
from bnpl.static_model import (
    StaticLatentState,
    alpha_posterior,
    chosen_before,
    compute_occurrence_stats,
    gibbs_update_alpha,
    gibbs_update_weights,
    gibbs_update_wstar,
    gibbs_update_Z,
    item_z_sums,
    log_marginal_likelihood,
    pl_log_probability,
    predictive_new_item_prob,
    run_static_gibbs,
    simulate_static_dataset,
    z_rates,
)


@pytest.mark.unit
class TestPlackettLuce:
    def test_equal_weights_pair(self):
        weights = {"a": 1.0, "b": 1.0}
        assert math.exp(pl_log_probability(weights, 0.0, ("a", "b"))) == pytest.approx(
            0.5
        )

    def test_three_items_prefix(self):
        weights = {"1": 2.0, "2": 1.0, "3": 1.0}
        log_p = pl_log_probability(weights, 0.0, PartialRanking(("1", "2")))
        assert math.exp(log_p) == pytest.approx(0.25)

    def test_remainder_enters_every_denominator(self):
        log_p = pl_log_probability({"a": 1.0}, 3.0, ("a",))
        assert log_p == pytest.approx(math.log(0.25))

    def test_zero_weight_item_is_impossible(self):
        assert pl_log_probability({"a": 0.0, "b": 1.0}, 0.0, ("a",)) == -math.inf

    @pytest.mark.parametrize("scale", [1e-3, 7.5, 1e6])
    def test_common_scale_leaves_probabilities_unchanged(self, scale):
        weights = {"a": 1.3, "b": 0.2, "c": 2.0}
        scaled = {item: w * scale for item, w in weights.items()}

        base = pl_log_probability(weights, 0.7, ("c", "a", "b"))
        moved = pl_log_probability(scaled, 0.7 * scale, ("c", "a", "b"))
        assert abs(moved - base) < 1e-12

    def test_missing_weight_raises(self):
        with pytest.raises(DomainError, match="without a weight"):
            pl_log_probability({"a": 1.0}, 0.0, ("a", "b"))

    def test_negative_remainder_raises(self):
        with pytest.raises(DomainError):
            pl_log_probability({"a": 1.0}, -1.0, ("a",))


@pytest.mark.unit
class TestOccurrenceStats:
    def test_counts_and_slots(self, three_lists):
        s = compute_occurrence_stats(three_lists)

        assert s.unique_items == ("a", "b", "c")
        assert s.counts.tolist() == [2, 2, 2]
        assert s.slot_items.tolist() == [0, 1, 1, 2, 0, 2]
        assert s.offsets.tolist() == [0, 2, 4, 6]
        assert s.slot_lists.tolist() == [0, 0, 1, 1, 2, 2]

    def test_delta_excludes_earlier_ranks_only(self, three_lists):
        s = compute_occurrence_stats(three_lists)

        assert s.delta(0, 1, "a") == 1
        assert s.delta(0, 2, "a") == 0
        assert s.delta(0, 2, "b") == 1
        assert s.delta(0, 2, "c") == 1

    def test_item_z_sums_match_dense_delta(self, three_lists, rng):
        s = compute_occurrence_stats(three_lists)
        Z = rng.exponential(size=s.n_slots)

        expected = s.delta_matrix().T @ Z
        np.testing.assert_allclose(item_z_sums(s, Z), expected)

    def test_chosen_before_is_within_list(self, three_lists):
        s = compute_occurrence_stats(three_lists)
        w = np.array([1.0, 2.0, 3.0])

        assert chosen_before(s, w).tolist() == [0.0, 1.0, 0.0, 2.0, 0.0, 1.0]

    def test_shared_index_allows_zero_counts(self):
        s = compute_occurrence_stats([("a",)], items=("a", "b"))
        assert s.counts.tolist() == [1, 0]

    def test_item_missing_from_index_raises(self):
        with pytest.raises(DomainError, match="missing from the item index"):
            compute_occurrence_stats([("a", "c")], items=("a", "b"))

    def test_plain_sequences_are_accepted(self):
        s = compute_occurrence_stats([["x", "y"], ["y"]])
        assert s.n_lists == 2
        assert s.n_slots == 3


@pytest.mark.unit
class TestConditionals:
    def _state(self, stats) -> StaticLatentState:
        return StaticLatentState(
            Z=np.ones(stats.n_slots),
            w=np.array([1.0, 2.0, 3.0]),
            w_star=0.5,
            alpha=1.0,
        )

    def test_z_rates(self, three_lists):
        s = compute_occurrence_stats(three_lists)
        rates = z_rates(self._state(s), s)

        np.testing.assert_allclose(rates, [6.5, 5.5, 6.5, 4.5, 6.5, 5.5])

    def test_z_draws_are_exponential(self, three_lists, rng):
        s = compute_occurrence_stats(three_lists)
        state = self._state(s)
        draws = np.array([gibbs_update_Z(state, s, rng)[3] for _ in range(4000)])

        result = stats.kstest(draws, "expon", args=(0.0, 1 / 4.5))
        assert result.pvalue > 0.01

    def test_zero_count_atom_is_an_internal_error(self, rng):
        s = compute_occurrence_stats([("a",)], items=("a", "b"))
        state = StaticLatentState(Z=np.ones(1), w=np.ones(2), w_star=1.0, alpha=1.0)

        with pytest.raises(SamplerInternalError) as exc_info:
            gibbs_update_weights(state, s, rng)
        assert exc_info.value.error_code == "zero_count_atom"

    def test_alpha_posterior_shape_and_rate(self, three_lists):
        s = compute_occurrence_stats(three_lists)
        state = self._state(s)
        config = ChainConfig(alpha_prior=GammaPrior(shape=2.0, rate=1.0))

        shape, rate = alpha_posterior(state, s.n_items, config)
        assert shape == 5.0
        assert rate == pytest.approx(1.0 + math.log1p(6.0))

    def test_improper_alpha_posterior_without_items(self):
        s = compute_occurrence_stats([])
        state = StaticLatentState(Z=np.zeros(0), w=np.zeros(0), w_star=1.0, alpha=1.0)

        with pytest.raises(ConfigurationError) as exc_info:
            alpha_posterior(state, s.n_items, ChainConfig())
        assert exc_info.value.error_code == "improper_alpha_posterior"

    def test_weight_draws_have_the_conditional_mean(self, three_lists, rng):
        s = compute_occurrence_stats(three_lists)
        state = self._state(s)
        rates = 1.0 + item_z_sums(s, state.Z)
        n = 5000
        draws = np.array([gibbs_update_weights(state, s, rng) for _ in range(n)])

        mean = s.counts / rates
        se = np.sqrt(s.counts) / rates / math.sqrt(n)
        assert np.all(np.abs(draws.mean(axis=0) - mean) < 4 * se)

    def test_wstar_draws_have_the_conditional_mean(self, rng):
        state = StaticLatentState(
            Z=np.array([1.0, 2.5, 0.5]), w=np.ones(2), w_star=1.0, alpha=7.0
        )
        n = 20000
        draws = np.array([gibbs_update_wstar(state, rng) for _ in range(n)])

        # Gamma(7, 5)
        assert abs(draws.mean() - 7 / 5) < 4 * math.sqrt(7) / 5 / math.sqrt(n)

    def test_alpha_draws_have_the_conditional_mean(self, three_lists, rng):
        s = compute_occurrence_stats(three_lists)
        state = self._state(s)
        config = ChainConfig(alpha_prior=GammaPrior(shape=1.0, rate=1.0))
        n = 20000
        draws = np.array(
            [gibbs_update_alpha(state, s, config, rng) for _ in range(n)]
        )

        shape, rate = 1.0 + 3, 1.0 + math.log1p(6.0)
        assert abs(draws.mean() - shape / rate) < (
            4 * math.sqrt(shape) / rate / math.sqrt(n)
        )

    def test_predictive_new_item_probability(self):
        state = StaticLatentState(
            Z=np.zeros(0), w=np.array([1.0, 1.0]), w_star=2.0, alpha=1.0
        )
        assert predictive_new_item_prob(state) == 0.5


@pytest.mark.unit
class TestMarginalLikelihood:
    def test_single_item_closed_form(self):
        s = compute_occurrence_stats([("a",)])
        params = GammaProcessParams(alpha=2.0, tau=1.0)

        log_p = log_marginal_likelihood(s, np.array([0.5]), params)
        assert log_p == pytest.approx(-2.0 * math.log1p(0.5) + math.log(2.0 / 1.5))

    def test_list_order_does_not_change_it(self, rng):
        lists = [("a", "b", "c"), ("b", "d"), ("a", "c", "d"), ("e",)]
        z = {
            (j, i): float(rng.exponential())
            for j, r in enumerate(lists)
            for i in range(len(r))
        }
        params = GammaProcessParams(alpha=1.5, tau=1.0)

        def evaluate(order: list[int]) -> tuple[dict, float]:
            s = compute_occurrence_stats([lists[j] for j in order])
            Z = np.array([z[j, i] for j in order for i in range(len(lists[j]))])
            counts = dict(zip(s.unique_items, s.counts.tolist(), strict=True))
            return counts, log_marginal_likelihood(s, Z, params)

        counts, log_p = evaluate([0, 1, 2, 3])
        permuted_counts, permuted_log_p = evaluate([3, 1, 0, 2])
        assert permuted_counts == counts
        assert permuted_log_p == pytest.approx(log_p, rel=1e-12)

    def test_zero_z_limit(self):
        s = compute_occurrence_stats([("a",)])
        params = GammaProcessParams(alpha=1.5, tau=2.0)

        log_p = log_marginal_likelihood(s, np.array([0.0]), params)
        assert log_p == pytest.approx(math.log(1.5 / 2.0))


@pytest.mark.unit
class TestRunStaticGibbs:
    def test_chain_shapes_and_normalization(self, three_lists, rng):
        config = ChainConfig(iterations=60, burn_in=20, thinning=4)
        chain = run_static_gibbs(three_lists, config, rng)

        assert chain.model == "static"
        assert chain.items == ("a", "b", "c")
        assert chain.weights.shape == (10, 1, 3)
        assert chain.w_star.shape == (10, 1)
        assert chain.phi.shape == (10, 0)
        assert chain.sweeps.tolist() == list(range(20, 60, 4))
        np.testing.assert_allclose(chain.normalized_weights().sum(axis=-1), 1.0)
        assert np.all(chain.weights > 0)

    def test_same_seed_same_chain(self, three_lists):
        config = ChainConfig(iterations=30, burn_in=10)
        a = run_static_gibbs(three_lists, config, np.random.default_rng(5))
        b = run_static_gibbs(three_lists, config, np.random.default_rng(5))

        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.alpha, b.alpha)

    def test_empty_input_raises(self, rng):
        with pytest.raises(DomainError):
            run_static_gibbs([], ChainConfig(iterations=2, burn_in=0), rng)

    def test_repeated_leader_gets_the_largest_weight(self, rng):
        lists = [("a", "b")] * 8 + [("b", "c")]
        chain = run_static_gibbs(lists, ChainConfig(iterations=3000, burn_in=500), rng)

        means = chain.normalized_weights()[:, 0, :].mean(axis=0)
        assert means[0] > means[1] > means[2]

    def test_chain_average_of_new_item_probability(self, three_lists, rng):
        config = ChainConfig(iterations=50, burn_in=10)
        chain = run_static_gibbs(three_lists, config, rng)
        w_star = chain.w_star[:, 0]
        expected = float(np.mean(w_star / (chain.weights[:, 0].sum(axis=1) + w_star)))

        assert predictive_new_item_prob(chain) == pytest.approx(expected)

    def test_new_item_probability_matches_predictive_simulation(
        self, three_lists, rng
    ):
        config = ChainConfig(iterations=2000, burn_in=1000)
        chain = run_static_gibbs(three_lists, config, rng)
        repeats = 20
        new = 0
        for d in range(chain.n_draws):
            measure = AtomicMeasure(
                atoms=dict(zip(chain.items, chain.weights[d, 0], strict=True)),
                remainder_mass=float(chain.w_star[d, 0]),
            )
            params = GammaProcessParams(float(chain.alpha[d]))
            for _ in range(repeats):
                ranking, _ = sample_top_m(params, measure, 1, rng)
                new += ranking.items[0] not in chain.items

        frequency = new / (chain.n_draws * repeats)
        assert abs(frequency - predictive_new_item_prob(chain)) < 0.02


@pytest.mark.slow
class TestExchangeability:
    def test_permuted_lists_give_the_same_posterior(self):
        lists = [
            ("a", "b", "c"),
            ("a", "c", "d"),
            ("b", "a", "e"),
            ("a", "b", "d"),
            ("c", "a", "b"),
        ]
        shuffled = [lists[j] for j in (4, 2, 0, 3, 1)]
        config = ChainConfig(
            iterations=20000, burn_in=2000, alpha_prior=GammaPrior(shape=1.0, rate=1.0)
        )

        def compare(rng: np.random.Generator) -> bool:
            a = run_static_gibbs(lists, config, rng)
            b = run_static_gibbs(shuffled, config, rng)
            order = [b.items.index(item) for item in a.items]
            means_a = a.normalized_weights()[:, 0, :-1].mean(axis=0)
            means_b = b.normalized_weights()[:, 0, :-1].mean(axis=0)[order]
            return bool(
                np.all(np.abs(means_a - means_b) < 0.02)
                and abs(a.alpha.mean() - b.alpha.mean()) < 0.1
            )

        assert rerun_on_failure(compare, passed=bool)


@pytest.mark.unit
class TestSimulateStaticDataset:
    def test_lists_come_from_the_returned_measure(self, rng):
        params = GammaProcessParams(alpha=3.0)
        rankings, measure = simulate_static_dataset(params, 5, 4, rng)

        assert len(rankings) == 5
        assert all(len(r) == 4 for r in rankings)
        assert {i for r in rankings for i in r.items} <= set(measure.atoms)
        assert all(i.startswith("item-") for r in rankings for i in r.items)

    def test_needs_a_list(self, rng):
        with pytest.raises(DomainError):
            simulate_static_dataset(GammaProcessParams(1.0), 0, 3, rng)


@pytest.mark.unit
class TestStaticGeweke:
    def test_kernel_preserves_the_joint(self):
        shape = GewekeShape(n_lists=3, list_length=2)
        report = rerun_on_failure(lambda rng: geweke_test("static", shape, 3000, rng))

        assert report.passed, report.model_dump()
        assert {s.name for s in report.statistics} == {
            "sum_Z",
            "w_star",
            "total_mass",
            "alpha",
        }

    def test_zero_data_instance_passes(self, rng):
        report = geweke_test("static", GewekeShape(n_lists=0), 2000, rng)

        assert report.passed
        assert report.z("sum_Z") == 0.0

    def test_corrupted_weight_rate_is_detected(self, monkeypatch, rng):
        correct = static_model.weight_rates

        def doubled(state, stats):
            return 2.0 * correct(state, stats)

        monkeypatch.setattr(static_model, "weight_rates", doubled)
        report = geweke_test("static", GewekeShape(n_lists=3), 20000, rng)

        assert not report.passed
        assert report.max_abs_z > 10
