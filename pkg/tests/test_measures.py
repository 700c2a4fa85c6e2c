import itertools
import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from bnpl._rerun import rerun_on_failure
from bnpl.errors import DomainError
from bnpl.measures import (
    AtomicMeasure,
    levy_intensity,
    levy_kappa,
    levy_psi,
    log_levy_kappa,
    sample_top_m,
    sample_truncated_gamma_process,
)
from bnpl.models import GammaProcessParams
from bnpl.static_model import pl_log_probability


@pytest.mark.unit
class TestLevyFunctionals:
    def test_psi_closed_form(self):
        params = GammaProcessParams(alpha=2.0, tau=1.0)
        assert levy_psi(params, 1.0) == pytest.approx(2.0 * math.log(2.0))
        assert levy_psi(params, 0.0) == 0.0

    def test_kappa_closed_form(self):
        params = GammaProcessParams(alpha=1.0, tau=1.0)
        assert levy_kappa(params, 1, 0.0) == pytest.approx(1.0)
        assert levy_kappa(params, 2, 1.0) == pytest.approx(0.25)
        assert log_levy_kappa(params, 3, 1.0) == pytest.approx(math.log(2.0 / 8.0))

    def test_intensity(self):
        params = GammaProcessParams(alpha=3.0, tau=2.0)
        assert levy_intensity(params, 0.5) == pytest.approx(3.0 * math.exp(-1.0) / 0.5)

    def test_kappa_is_minus_the_derivative_of_the_previous_moment(self):
        params = GammaProcessParams(alpha=2.0, tau=1.5)
        h = 1e-5
        for n in range(1, 5):
            for z in (0.3, 1.7, 4.0):
                up = levy_kappa(params, n, z + h)
                down = levy_kappa(params, n, z - h)
                slope = (up - down) / (2 * h)
                assert -slope == pytest.approx(levy_kappa(params, n + 1, z), rel=1e-4)

    @pytest.mark.parametrize("z", [-0.1, float("nan")])
    def test_psi_rejects_negative_z(self, z):
        with pytest.raises(DomainError):
            levy_psi(GammaProcessParams(1.0), z)

    def test_kappa_rejects_zero_n(self):
        with pytest.raises(DomainError, match="n < 1"):
            levy_kappa(GammaProcessParams(1.0), 0, 1.0)

    def test_kappa_rejects_negative_z(self):
        with pytest.raises(DomainError):
            levy_kappa(GammaProcessParams(1.0), 1, -1.0)

    def test_intensity_rejects_non_positive_w(self):
        with pytest.raises(DomainError):
            levy_intensity(GammaProcessParams(1.0), 0.0)

    def test_params_validate(self):
        with pytest.raises(DomainError):
            GammaProcessParams(alpha=0.0)
        with pytest.raises(DomainError):
            GammaProcessParams(alpha=1.0, tau=-1.0)


@pytest.mark.unit
class TestAtomicMeasure:
    def test_masses_and_normalization(self):
        measure = AtomicMeasure(atoms={"a": 1.0, "b": 3.0}, remainder_mass=4.0)

        assert measure.instantiated_mass == 4.0
        assert measure.total_mass == 8.0
        assert measure.normalized() == {"a": 0.125, "b": 0.375}

    def test_rejects_non_positive_atoms(self):
        with pytest.raises(DomainError):
            AtomicMeasure(atoms={"a": 0.0})
        with pytest.raises(DomainError):
            AtomicMeasure(remainder_mass=-1.0)

    def test_zero_mass_cannot_be_normalized(self):
        with pytest.raises(DomainError):
            AtomicMeasure().normalized()

    def test_fresh_labels_skip_taken_names(self):
        measure = AtomicMeasure(atoms={"new-0": 1.0}, remainder_mass=1.0)

        label, issued = measure.fresh_label()
        assert label == "new-1"
        assert issued == 2


@pytest.mark.unit
class TestTruncatedGammaProcess:
    def test_epsilon_one_instantiates_nothing(self, rng):
        measure = sample_truncated_gamma_process(GammaProcessParams(1.0), 1.0, rng)
        assert measure.atoms == {}
        assert measure.remainder_mass > 0

    def test_residual_is_below_epsilon(self, rng):
        measure = sample_truncated_gamma_process(GammaProcessParams(2.0), 1e-6, rng)
        assert measure.remainder_mass <= 1e-6 * measure.total_mass * (1 + 1e-9)
        assert len(measure.atoms) > 0

    def test_rejects_non_positive_epsilon(self, rng):
        with pytest.raises(DomainError):
            sample_truncated_gamma_process(GammaProcessParams(1.0), 0.0, rng)

    def test_first_normalized_weight_has_the_stick_mean(self, rng):
        n = 4000
        firsts = np.empty(n)
        for i in range(n):
            measure = sample_truncated_gamma_process(GammaProcessParams(1.0), 1e-3, rng)
            firsts[i] = measure.atoms["g0"] / measure.total_mass

        assert abs(firsts.mean() - 0.5) < 4 * math.sqrt(1 / 12 / n)

    def test_total_mass_is_gamma(self, rng):
        params = GammaProcessParams(alpha=2.0, tau=1.5)
        totals = [
            sample_truncated_gamma_process(params, 1e-3, rng).total_mass
            for _ in range(2000)
        ]
        result = stats.kstest(totals, "gamma", args=(2.0, 0.0, 1 / 1.5))
        assert result.pvalue > 0.01


@pytest.mark.unit
class TestSampleTopM:
    def test_single_atom_and_no_remainder(self, rng):
        measure = AtomicMeasure(atoms={"only": 1.0})
        ranking, updated = sample_top_m(GammaProcessParams(1.0), measure, 1, rng)

        assert ranking.items == ("only",)
        assert updated.atoms == {"only": 1.0}

    def test_exhausted_measure_raises(self, rng):
        measure = AtomicMeasure(atoms={"only": 1.0})
        with pytest.raises(DomainError, match="exhausted"):
            sample_top_m(GammaProcessParams(1.0), measure, 2, rng)

    def test_m_must_be_positive(self, rng):
        with pytest.raises(DomainError):
            sample_top_m(
                GammaProcessParams(1.0), AtomicMeasure(remainder_mass=1.0), 0, rng
            )

    def test_new_atoms_conserve_mass(self, rng):
        measure = AtomicMeasure(remainder_mass=5.0)
        ranking, updated = sample_top_m(
            GammaProcessParams(1.0), measure, 4, rng, epoch=3
        )

        assert len(ranking) == 4
        assert ranking.epoch == 3
        assert set(ranking.items) <= set(updated.atoms)
        assert updated.total_mass == pytest.approx(5.0)
        assert updated.issued == 4

    def test_labels_never_repeat_across_calls(self, rng):
        params = GammaProcessParams(3.0)
        measure = AtomicMeasure(remainder_mass=2.0)
        seen: list[str] = []
        for _ in range(5):
            ranking, measure = sample_top_m(params, measure, 3, rng)
            seen.extend(i for i in ranking.items if i not in seen)
        assert len(seen) == len(set(seen))
        assert len(measure.atoms) == len(seen)

    def test_first_pick_frequencies_follow_weights(self, rng):
        measure = AtomicMeasure(atoms={"a": 2.0, "b": 1.0}, remainder_mass=1.0)
        params = GammaProcessParams(1.0)
        n = 20000
        firsts = [sample_top_m(params, measure, 1, rng)[0].items[0] for _ in range(n)]

        observed = [firsts.count("a"), firsts.count("b")]
        observed.append(n - sum(observed))
        result = stats.chisquare(observed, np.array([0.5, 0.25, 0.25]) * n)
        assert result.pvalue > 0.01

    def test_full_orderings_follow_plackett_luce(self):
        weights = {"a": 3.0, "b": 2.0, "c": 1.0}
        measure = AtomicMeasure(atoms=weights)
        orderings = list(itertools.permutations(weights))
        expected = np.array(
            [math.exp(pl_log_probability(weights, 0.0, o)) for o in orderings]
        )
        n = 20000

        def frequencies(rng: np.random.Generator) -> float:
            draws = Counter(
                sample_top_m(GammaProcessParams(1.0), measure, 3, rng)[0].items
                for _ in range(n)
            )
            observed = [draws[o] for o in orderings]
            return float(stats.chisquare(observed, expected * n).pvalue)

        assert rerun_on_failure(frequencies, passed=lambda p: p > 0.01) > 0.01

    def test_first_new_atom_takes_a_uniform_share_when_alpha_is_one(self):
        measure = AtomicMeasure(remainder_mass=1.0)
        params = GammaProcessParams(1.0)

        def pvalue(rng: np.random.Generator) -> float:
            shares = []
            for _ in range(2000):
                ranking, updated = sample_top_m(params, measure, 1, rng)
                shares.append(updated.atoms[ranking.items[0]])
            return float(stats.kstest(shares, "uniform").pvalue)

        assert rerun_on_failure(pvalue, passed=lambda p: p > 0.01) > 0.01
