"""Hoeffding bands and the Monte-Carlo estimators over perfect samples."""

import math
import os
from fractions import Fraction

import numpy as np
import pytest

from src.bounds.lemmas import eta_mean_bound
from src.errors import ParameterError, PreconditionError
from src.estimation import (
    concentration_empirical,
    estimate_dbar_upper,
    estimate_eta_theta,
    estimate_marginal,
    exact_phase_gap,
    hoeffding_band,
    hoeffding_halfwidth,
    estimate_phase_gap,
    estimate_phase_gap_kernel,
    required_replications,
)
from src.estimation.hoeffding import within_band
from src.exact.coupling import exact_dbar_attractive
from src.exact.transfer import marginal_plus, pair_marginals, stationary
from src.kernels.bk_kernels import lower, mixed, upper
from src.kernels.orders import ExplicitOrders
from src.kernels.params import ModelParams
from src.kernels.table_kernel import TableKernel, random_attractive_table
from src.kernels.weights import Corollary1Weights, GeometricWeights
from src.workers import ReplicatePool, resolve_workers

EPSILON = Fraction(1, 4)


def _geometric(ratio, orders):
    return ModelParams(EPSILON, GeometricWeights(Fraction(ratio)), ExplicitOrders(orders))


def _pairs_in_bands(report, exact_pairs):
    return all(within_band(float(exact_pairs[key]), tuple(report.extra["pairs"][key]["band"])) for key in exact_pairs)


class TestHoeffding:
    def test_halfwidth(self):
        expected = math.sqrt(math.log(200) / 20000)
        assert hoeffding_halfwidth(10000, 0.99) == pytest.approx(expected)

    def test_required_replications_reaches_target(self):
        n = required_replications(0.01, 0.99)
        assert n == 26492
        assert hoeffding_halfwidth(n, 0.99) <= 0.01
        assert hoeffding_halfwidth(n - 1, 0.99) > 0.01

    def test_band_is_clipped(self):
        assert hoeffding_band(0.999, 100)[1] == 1.0
        assert hoeffding_band(0.0, 100)[0] == 0.0

    @pytest.mark.parametrize("n,confidence", [(0, 0.99), (10, 1.0), (10, 0.0)])
    def test_bad_inputs(self, n, confidence):
        with pytest.raises(ParameterError):
            hoeffding_halfwidth(n, confidence)

    def test_within_band(self):
        assert within_band(0.5, (0.4, 0.6))
        assert not within_band(0.7, (0.4, 0.6))


class TestDbarEstimate:
    def test_order_zero_pair(self, two_state_params):
        report = estimate_dbar_upper(
            lower(two_state_params, 0), upper(two_state_params, 0), n=2000, seed=17, confidence=0.9999, workers=1
        )
        assert report.extra["order_violations"] == 0
        assert within_band(0.5, report.band)
        assert "wald_majorant" not in report.extra

    def test_lower_ladder_pair_carries_majorant(self, small_params):
        report = estimate_dbar_upper(lower(small_params, 0), lower(small_params, 1), n=300, seed=3, workers=1)
        majorant = report.extra["wald_majorant"]
        assert majorant["k"] == 0
        assert majorant["mean_eta"] == 0.0
        assert majorant["majorant"] == pytest.approx(majorant["p_s0_complement"])
        assert report.extra["order_violations"] == 0

    def test_same_seed_same_report(self, two_state_params):
        a, b = lower(two_state_params, 1), upper(two_state_params, 1)
        first = estimate_dbar_upper(a, b, n=200, seed=5, workers=1)
        second = estimate_dbar_upper(a, b, n=200, seed=5, workers=1)
        assert first.to_dict() == second.to_dict()

    def test_non_attractive_kernel(self, two_state_params):
        bad = TableKernel.from_strings(1, ["3/4", "1/4"])
        with pytest.raises(PreconditionError):
            estimate_dbar_upper(bad, upper(two_state_params, 1), n=10, seed=1, workers=1)


class TestMarginal:
    def test_two_state_marginal_is_in_band(self, two_state_params):
        report = estimate_marginal(lower(two_state_params, 1), n=3000, seed=7, confidence=0.9999, workers=1)
        assert report.successes == 3000
        assert within_band(0.7, report.band)
        assert report.extra["magnetization"] == pytest.approx(2 * report.estimate - 1)

    def test_no_replications(self, two_state_params):
        with pytest.raises(ParameterError):
            estimate_marginal(lower(two_state_params, 1), n=0, seed=7, workers=1)

    def test_pair_frequencies_are_in_band(self, two_state_params):
        g = lower(two_state_params, 1)
        report = estimate_marginal(g, n=3000, seed=7, confidence=0.9999, workers=1)
        assert sum(report.extra["pairs"][key]["estimate"] for key in report.extra["pairs"]) == pytest.approx(1.0)
        assert _pairs_in_bands(report, pair_marginals(stationary(g, order=2)))

    def test_doubling_replications_stays_consistent(self, two_state_params):
        g = lower(two_state_params, 1)
        single = estimate_marginal(g, n=1500, seed=7, confidence=0.9999, workers=1)
        double = estimate_marginal(g, n=3000, seed=7, confidence=0.9999, workers=1)
        assert within_band(0.7, single.band)
        assert within_band(0.7, double.band)
        assert double.halfwidth < single.halfwidth
        assert abs(double.estimate - single.estimate) <= single.halfwidth + double.halfwidth

    @pytest.mark.slow
    def test_worker_count_does_not_change_results(self, small_params):
        g = lower(small_params, 2)
        single = estimate_marginal(g, n=400, seed=21, workers=1)
        pooled = estimate_marginal(g, n=400, seed=21, workers=2)
        assert single.to_dict() == pooled.to_dict()


class TestEtaTheta:
    def test_coalescence_never_exceeds_regeneration(self, small_params):
        report = estimate_eta_theta(lower(small_params, 2), n=200, seed=4, tail_max=5, workers=1)
        assert report.order == 3
        assert report.theta.estimate <= report.eta.estimate
        probabilities = [row["p_theta_exceeds"] for row in report.tail]
        assert len(probabilities) == 6
        assert probabilities == sorted(probabilities, reverse=True)

    def test_explicit_regeneration_order(self, two_state_params):
        report = estimate_eta_theta(lower(two_state_params, 1), n=100, seed=4, m=3, workers=1)
        assert report.order == 3
        assert report.exact_eta_mean == "13/1"
        assert report.to_dict()["exact_eta_mean"] == "13/1"

    def test_order_zero(self, two_state_params):
        report = estimate_eta_theta(lower(two_state_params, 0), n=50, seed=4, workers=1)
        assert report.eta.estimate == 0.0
        assert report.theta.estimate == 0.0
        assert report.exact_eta_mean == "0"

    def test_table_without_base_cells(self):
        table = TableKernel.from_strings(2, ["1/5", "1/2", "2/5", "4/5"])
        with pytest.raises(PreconditionError):
            estimate_eta_theta(table, n=10, seed=1, workers=1)

    def test_explicit_order_needs_epsilon(self):
        table = TableKernel.from_strings(2, ["1/5", "1/2", "2/5", "4/5"])
        with pytest.raises(ParameterError):
            estimate_eta_theta(table, n=10, seed=1, m=2, workers=1)


class TestConcentration:
    def test_blocks_of_three_always_deviate(self, small_params):
        # a mean of three signs is never within 1/15 of 2/15
        report = concentration_empirical(small_params, 1, 1, n=100, seed=8, workers=1)
        assert report.estimate == 1.0
        assert report.extra["magnetization"] == "2/15"
        assert report.extra["magnetization_source"] == "exact"
        assert report.extra["block"] == 3
        assert report.extra["kernel"] == "mixed(1,2)"


class TestPhaseGap:
    def test_order_zero_has_no_gap(self, two_state_params):
        report = estimate_phase_gap_kernel(lower(two_state_params, 0), horizon=5, n=50, seed=2, workers=1)
        assert report.estimate == 0.0
        assert report.extra["exact_gap"] == "0/1"

    def test_markov_gap_decays_geometrically(self, two_state_params):
        # p(+|+) - p(+|-) = 1/6
        assert exact_phase_gap(lower(two_state_params, 1), 3) == Fraction(1, 216)

    def test_highest_truncation_below_cap(self, small_params):
        report = estimate_phase_gap(small_params, order_cap=4, horizon=10, n=50, seed=2, workers=1)
        assert report.extra["truncation_index"] == 2
        assert report.extra["kernel"] == "lower(2)"

    def test_cap_below_first_order(self):
        from src.bounds.corollaries import corollary1_params

        with pytest.raises(ParameterError):
            estimate_phase_gap(corollary1_params(577), order_cap=100, horizon=10, n=10, seed=2)

    def test_mixed_variant_refused(self, small_params):
        with pytest.raises(ParameterError):
            estimate_phase_gap(small_params, order_cap=4, horizon=10, n=10, seed=2, variant="mixed")

    def test_horizon_must_be_positive(self, two_state_params):
        with pytest.raises(ParameterError):
            estimate_phase_gap_kernel(lower(two_state_params, 1), horizon=0, n=10, seed=2)


def _bk_truncations():
    params = ModelParams(EPSILON, Corollary1Weights(), ExplicitOrders([1, 3, 5]))
    return [lower(params, 0), lower(params, 1), lower(params, 2), upper(params, 1), upper(params, 2), mixed(params, 1, 2)]


def _random_tables():
    return [random_attractive_table(1 + i % 8, np.random.default_rng(100 + i)) for i in range(10)]


@pytest.mark.slow
class TestMarginalsAgainstExactLaws:
    @pytest.mark.parametrize("index", range(16))
    def test_marginal_and_pairs_in_band(self, index):
        kernel = (_random_tables() + _bk_truncations())[index]
        report = estimate_marginal(kernel, n=2000, seed=50 + index, confidence=0.9999, workers=1)
        assert within_band(float(marginal_plus(stationary(kernel))), report.band)
        assert _pairs_in_bands(report, pair_marginals(stationary(kernel, order=max(kernel.order, 2))))


class TestRegenerationMeans:
    @pytest.mark.parametrize(
        "epsilon,m",
        [(Fraction(1, 4), 1), (Fraction(1, 4), 3), (Fraction(1, 4), 5), (Fraction(3, 10), 3)],
    )
    def test_mean_eta_below_bound_and_theta_below_eta(self, epsilon, m):
        params = ModelParams(epsilon, Corollary1Weights(), ExplicitOrders([m]))
        report = estimate_eta_theta(lower(params, 1), n=1000, seed=9, tail_max=4, workers=1)
        assert report.order == m
        assert report.eta_within_bound
        assert report.eta_bound_value == pytest.approx(float(eta_mean_bound(m, epsilon).value_interval().hi))
        assert report.theta.estimate <= report.eta.estimate
        assert report.to_dict()["eta_within_bound"] is True


class TestDbarAgainstExactValues:
    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_lower_upper_band_contains_exact_dbar(self, small_params, k):
        a, b = lower(small_params, k), upper(small_params, k)
        exact = exact_dbar_attractive(a, b)
        report = estimate_dbar_upper(a, b, n=2000, seed=30 + k, confidence=0.9999, workers=1)
        assert report.extra["order_violations"] == 0
        assert within_band(float(exact.value), report.band)

    def test_order_zero_dbar_is_one_half(self, small_params):
        assert exact_dbar_attractive(lower(small_params, 0), upper(small_params, 0)).value == Fraction(1, 2)


class TestConcentrationBound:
    GRID = [(0, 0), (1, 1), (2, 2), (3, 3), (0, 1), (1, 2), (2, 3)]

    @pytest.mark.parametrize("r,k", GRID)
    def test_deviation_frequency_below_bound(self, r, k):
        params = _geometric(Fraction(9, 10), [1, 3, 5, 7, 9, 11, 13, 15])
        report = concentration_empirical(params, r, k, n=300, seed=60 + r + k, confidence=0.99, workers=1)
        assert report.extra["block"] == params.order(k + 1)
        assert report.band[0] <= report.extra["concentration_rhs_value"]


@pytest.mark.slow
class TestWaldMajorant:
    FAMILIES = [
        lambda: ModelParams(EPSILON, Corollary1Weights(), ExplicitOrders([1, 3, 5, 7])),
        lambda: _geometric(Fraction(9, 10), [1, 3, 5, 7]),
    ]

    @pytest.mark.parametrize("family", [0, 1])
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_disagreement_below_majorant(self, family, k):
        params = self.FAMILIES[family]()
        report = estimate_dbar_upper(lower(params, k), lower(params, k + 1), n=500, seed=70 + k, workers=1)
        majorant = report.extra["wald_majorant"]
        assert majorant["k"] == k
        assert report.extra["order_violations"] == 0
        assert report.band[0] <= majorant["majorant_upper"]


class TestWorkers:
    def test_zero_uses_every_core(self):
        assert resolve_workers(0) == (os.cpu_count() or 1)

    def test_explicit_count_is_kept(self):
        assert resolve_workers(3) == 3
        assert ReplicatePool(3).workers == 3

    def test_bundled_default_is_every_core(self):
        import yaml
        from pathlib import Path

        raw = yaml.safe_load((Path(__file__).resolve().parent.parent / "config" / "settings.yaml").read_text())
        assert raw["runtime"]["workers"] == 0
