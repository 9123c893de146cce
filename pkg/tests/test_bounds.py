"""Criterium checker, family verifiers, minimal orders and the closed-form lemmas."""

import math
from fractions import Fraction

import pytest

from src.bounds.corollaries import (
    BaseStepPolicy,
    corollary1_params,
    corollary1_verify,
    corollary2_verify,
    verify_family,
)
from src.bounds.criterium import (
    Verdict,
    check_order_condition,
    compute_A_k,
    create_r_function,
    dbar_ledger,
    geometric_ledger,
    minimal_orders,
    r_block_root,
    r_predecessor,
    r_table,
    theorem3_check,
)
from src.bounds.lemmas import (
    concentration_rhs,
    eta_mean_bound,
    expected_eta,
    magnetization_check,
    magnetization_lower_bound,
    weight_gap,
)
from src.bounds.logspace import Outcome
from src.errors import ConfigError, HypothesisError, MissingTailRuleError, ParameterError
from src.kernels.orders import ExplicitOrders
from src.kernels.params import ModelParams
from src.kernels.weights import Corollary1Weights, GeometricWeights

ALPHA = Fraction(1, 8)


def _steps(report, name, k):
    return [s for s in report.chain_steps if s["name"] == name and s["k"] == k]


class TestRFunctions:
    def test_predecessor(self):
        r = r_predecessor()
        assert [r(k) for k in (1, 2, 5)] == [0, 1, 4]

    def test_block_root(self):
        r = r_block_root(1)
        assert r(1) == 0
        assert r(4) == 1
        assert r(16) == 2

    def test_domain(self):
        with pytest.raises(ParameterError):
            r_predecessor()(0)

    def test_table_must_stay_below_k(self):
        r = r_table([0, 5])
        assert r(1) == 0
        with pytest.raises(ParameterError):
            r(2)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            create_r_function({"kind": "sqrt"})


class TestOrderCondition:
    def test_base_constant(self):
        params = corollary1_params(577)
        A0 = compute_A_k(params, r_predecessor(), ALPHA, 0)
        enclosure = A0.value_interval()
        assert float(enclosure.lo) == pytest.approx(160 * math.log(2), rel=1e-12)

    def test_direct_base_threshold_exceeds_first_order(self):
        check = check_order_condition(corollary1_params(577), r_predecessor(), ALPHA, 0)
        assert check.gap == Fraction(1, 3)
        assert float(check.threshold.value_interval().lo) == pytest.approx(1440 * math.log(2), rel=1e-12)
        assert check.satisfied == Outcome.NO

    def test_alpha_range(self):
        with pytest.raises(ParameterError):
            compute_A_k(corollary1_params(577), r_predecessor(), Fraction(3, 10), 0)

    def test_non_positive_gap(self):
        params = ModelParams(Fraction(1, 4), Corollary1Weights(), ExplicitOrders([1, 3, 5]))
        with pytest.raises(HypothesisError):
            check_order_condition(params, create_r_function({"kind": "zero"}), ALPHA, 1)


class TestLedger:
    def test_geometric_ledger_is_strict(self):
        ledger = geometric_ledger(ALPHA, Fraction(1, 4), 2)
        assert ledger.lhs == Fraction(1, 4)
        assert ledger.rhs == Fraction(1, 2)
        assert ledger.holds

    def test_missing_tail(self):
        with pytest.raises(MissingTailRuleError):
            dbar_ledger([Fraction(1, 16)], Fraction(1, 4))

    def test_equality_is_not_strict(self):
        ledger = dbar_ledger([Fraction(1, 8)], Fraction(1, 4), tail=Fraction(1, 8))
        assert ledger.lhs == ledger.rhs
        assert not ledger.holds


class TestGeometricFamily:
    def test_printed_constant_is_certified(self):
        report = corollary1_verify(577)
        assert report.verdict == Verdict.NON_UNIQUENESS_CERTIFIED
        assert report.per_k[0].accepted_by == "printed_threshold"
        kinds = {d["kind"] for d in report.discrepancies}
        assert "printed_threshold" in kinds

    def test_strict_base_rejects_first_order(self):
        report = corollary1_verify(577, policy=BaseStepPolicy.EXACT)
        assert report.verdict == Verdict.NOT_CERTIFIED
        assert report.per_k[0].satisfied == Outcome.NO

    def test_base_below_printed_constant_fails_comparison_step(self):
        report = corollary1_verify(575)
        assert report.verdict == Verdict.NOT_CERTIFIED
        assert _steps(report, "S4", 1)[0]["outcome"] == "no"

    def test_small_base_fails_growth_step(self):
        report = corollary1_verify(3)
        assert report.verdict == Verdict.NOT_CERTIFIED
        assert _steps(report, "S3", 1)[0]["outcome"] == "no"

    def test_even_base_rejected(self):
        with pytest.raises(ParameterError):
            corollary1_params(578)


class TestBlockFamily:
    def test_c7_is_certified(self):
        assert corollary2_verify(7).verdict == Verdict.NON_UNIQUENESS_CERTIFIED

    def test_c6_fails_final_step(self):
        report = corollary2_verify(6)
        assert report.verdict == Verdict.NOT_CERTIFIED
        assert _steps(report, "iv at k=0", 0)[0]["outcome"] == "no"

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_block_gap_bound_holds_per_k(self, k):
        report = corollary2_verify(7)
        steps = _steps(report, "gap bound", k)
        assert len(steps) == 1
        assert steps[0]["outcome"] == "yes"
        assert "l = 2" in steps[0]["note"]

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            verify_family("corollary9", 7)

    def test_report_serializes(self):
        data = verify_family("corollary2", 7, k_max=1).to_dict()
        assert data["verdict"] == "NonUniquenessCertified"
        assert data["k_max"] == 1
        assert len(data["per_k"]) == 2


class TestCustomCheck:
    def test_alpha_rejected(self):
        params = ModelParams(Fraction(1, 4), Corollary1Weights(), ExplicitOrders([217]))
        with pytest.raises(ParameterError):
            theorem3_check(params, r_predecessor(), Fraction(3, 10), 0, require_tail=False)

    def test_tail_rule_required(self):
        params = ModelParams(Fraction(1, 4), Corollary1Weights(), ExplicitOrders([999]))
        with pytest.raises(MissingTailRuleError):
            theorem3_check(params, r_predecessor(), ALPHA, 0)

    def test_finite_only_never_certifies(self):
        params = ModelParams(Fraction(1, 4), Corollary1Weights(), ExplicitOrders([999]))
        report = theorem3_check(params, r_predecessor(), ALPHA, 0, require_tail=False)
        assert report.per_k[0].satisfied == Outcome.YES
        assert report.verdict == Verdict.NOT_CERTIFIED
        assert "no inductive tail rule" in report.reasons


class TestMinimalOrders:
    def test_first_order(self):
        params = minimal_orders(Corollary1Weights(), Fraction(1, 4), ALPHA, r_predecessor(), 0)
        assert params.orders.exact(1) == 999

    def test_minimal_orders_pass_direct_check(self):
        params = minimal_orders(Corollary1Weights(), Fraction(1, 4), ALPHA, r_predecessor(), 0)
        assert check_order_condition(params, r_predecessor(), ALPHA, 0).satisfied == Outcome.YES


class TestLemmas:
    def test_eta_bound_and_exact_mean(self):
        eps = Fraction(1, 4)
        assert eta_mean_bound(1, eps).exact == 2
        assert eta_mean_bound(3, eps).exact == 24
        assert expected_eta(1, eps) == 1
        assert expected_eta(3, eps) == 13
        assert eta_mean_bound(0, eps).sign == 0

    def test_weight_gap(self, small_params):
        assert weight_gap(small_params, 1, 1) == Fraction(2, 9)
        assert magnetization_lower_bound(small_params, 1, 1) == Fraction(1, 9)

    def test_negative_gap(self, small_params):
        with pytest.raises(HypothesisError):
            magnetization_lower_bound(small_params, 0, 1)

    def test_magnetization_check(self, small_params):
        check = magnetization_check(small_params, 1, 1)
        assert check.exact
        assert check.magnetization == pytest.approx(2 / 15)
        assert check.outcome == Outcome.YES

    def test_concentration_rhs_zero_magnetization(self, small_params):
        assert concentration_rhs(small_params, 1, 1, magnetization=Fraction(0)).exact == 2

    def test_concentration_rhs_is_a_probability_bound(self, small_params):
        rhs = concentration_rhs(small_params, 1, 1)
        assert 0 < float(rhs.value_interval().hi) <= 2


class TestMagnetizationGrid:
    GRID = [(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (1, 1), (1, 2), (1, 3), (1, 4), (2, 2), (2, 3), (2, 4), (3, 3)]

    @pytest.fixture(scope="class")
    def geometric_params(self):
        return ModelParams(Fraction(1, 4), GeometricWeights(Fraction(9, 10)), ExplicitOrders([1, 3, 5, 7, 9, 11, 13, 15]))

    @pytest.mark.parametrize("r,k", GRID)
    def test_stationary_magnetization_meets_lower_bound(self, geometric_params, r, k):
        assert weight_gap(geometric_params, r, k) == 2 * Fraction(9, 10) ** (k + 1) - Fraction(9, 10) ** r
        check = magnetization_check(geometric_params, r, k)
        assert check.outcome == Outcome.YES

    def test_gap_closes_past_six_components(self, geometric_params):
        with pytest.raises(HypothesisError):
            magnetization_lower_bound(geometric_params, 0, 6)
