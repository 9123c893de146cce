"""Exact stationary laws, d-bar identities, couplings and truncation ledgers."""

import csv
from fractions import Fraction

import numpy as np
import pytest

from src.errors import DominationError, ParameterError, PreconditionError, StateSpaceCapError
from src.exact.coupling import (
    exact_dbar_attractive,
    hulse_coupling,
    hulse_stationary,
    maximal_coupling_check,
    truncation_ledger,
)
from src.exact.transfer import (
    binary_entropy,
    entropy,
    indicator_plus,
    marginal_plus,
    pair_marginals,
    ruelle_apply,
    ruelle_iterate,
    stationary,
    write_distribution_csv,
)
from src.kernels.bk_kernels import FullBK, lower, upper
from src.kernels.orders import ExplicitOrders
from src.kernels.params import ModelParams
from src.kernels.table_kernel import TableKernel, random_attractive_table
from src.kernels.weights import Corollary1Weights


class TestStationary:
    def test_two_state_marginal(self, two_state_params):
        dist = stationary(lower(two_state_params, 1))
        assert dist.exact
        assert marginal_plus(dist) == Fraction(7, 10)
        assert dist.summary()["marginal_plus"] == "7/10"

    def test_upper_two_state_marginal(self, two_state_params):
        assert marginal_plus(stationary(upper(two_state_params, 1))) == Fraction(3, 10)

    def test_order_zero_is_lifted(self, two_state_params):
        dist = stationary(lower(two_state_params, 0))
        assert dist.order == 1
        assert marginal_plus(dist) == Fraction(3, 4)

    def test_weights_sum_to_one(self, small_params):
        dist = stationary(lower(small_params, 3))
        assert dist.size == 32
        assert sum(dist.as_array()) == pytest.approx(1.0)

    def test_entropy(self, two_state_params):
        g = lower(two_state_params, 1)
        expected = 0.7 * binary_entropy(Fraction(3, 4)) + 0.3 * binary_entropy(Fraction(7, 12))
        assert entropy(g, stationary(g)) == pytest.approx(expected)

    def test_state_space_cap(self):
        params = ModelParams(Fraction(1, 4), Corollary1Weights(), ExplicitOrders([25]))
        with pytest.raises(StateSpaceCapError):
            stationary(lower(params, 1))

    def test_full_model_refused(self, two_state_params):
        with pytest.raises(PreconditionError):
            stationary(FullBK(two_state_params))

    def test_distribution_csv(self, two_state_params, tmp_path):
        path = write_distribution_csv(stationary(lower(two_state_params, 1)), tmp_path / "dist.csv")
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        assert [r["weight"] for r in rows] == ["3/10", "7/10"]


class TestRuelle:
    def test_extremal_pasts_agree_for_markov_chain(self, two_state_params):
        limits = ruelle_iterate(lower(two_state_params, 1), indicator_plus(1), 1)
        assert limits.converged
        assert limits.plus == pytest.approx(0.7, abs=1e-9)
        assert limits.minus == pytest.approx(0.7, abs=1e-9)

    @pytest.mark.parametrize("order", [1, 2, 3, 4, 5, 6])
    def test_attractive_kernel_keeps_increasing_functions_increasing(self, order):
        rng = np.random.default_rng(300 + order)
        g = random_attractive_table(order, rng)
        f = np.zeros(1 << order)
        for i, c in enumerate(rng.uniform(0.0, 1.0, size=order)):
            f += c * ((np.arange(1 << order) >> i) & 1)
        for _ in range(5):
            f = ruelle_apply(g, f, order)
            for bits in range(1 << order):
                for i in range(order):
                    if not bits >> i & 1:
                        assert f[bits] <= f[bits | 1 << i] + 1e-12

    def test_indicator_limits_are_ordered(self, small_params):
        limits = ruelle_iterate(lower(small_params, 2), indicator_plus(3), 3)
        assert limits.converged
        assert limits.minus <= limits.plus + 1e-12


class TestPairMarginals:
    def test_two_state_pairs(self, two_state_params):
        pairs = pair_marginals(stationary(lower(two_state_params, 1), order=2))
        assert pairs == {
            "++": Fraction(21, 40),
            "+-": Fraction(7, 40),
            "-+": Fraction(7, 40),
            "--": Fraction(1, 8),
        }

    def test_order_zero_pairs_factorize(self, two_state_params):
        pairs = pair_marginals(stationary(lower(two_state_params, 0), order=2))
        assert pairs["++"] == Fraction(9, 16)
        assert pairs["--"] == Fraction(1, 16)

    def test_pairs_agree_with_one_symbol_marginal(self, small_params):
        dist = stationary(lower(small_params, 2))
        pairs = pair_marginals(dist)
        assert pairs["++"] + pairs["-+"] == marginal_plus(dist)
        assert sum(pairs.values()) == 1

    def test_order_below_kernel_order(self, small_params):
        with pytest.raises(ParameterError):
            stationary(lower(small_params, 2), order=2)

    def test_one_symbol_contexts_refused(self, two_state_params):
        with pytest.raises(ParameterError):
            pair_marginals(stationary(lower(two_state_params, 1)))


class TestDbar:
    def test_order_zero_pair(self, two_state_params):
        result = exact_dbar_attractive(lower(two_state_params, 0), upper(two_state_params, 0))
        assert result.exact
        assert result.value == Fraction(1, 2)

    def test_two_state_pair(self, two_state_params):
        result = exact_dbar_attractive(lower(two_state_params, 1), upper(two_state_params, 1))
        assert result.value == Fraction(2, 5)
        assert result.to_dict()["dbar"] == "2/5"

    def test_wrong_orientation(self, two_state_params):
        with pytest.raises(DominationError):
            exact_dbar_attractive(upper(two_state_params, 1), lower(two_state_params, 1))

    def test_lower_ladder_steps(self, small_params):
        step = exact_dbar_attractive(lower(small_params, 1), lower(small_params, 2))
        assert step.value >= 0

    def test_hulse_marginals(self, two_state_params):
        coupled = hulse_coupling(lower(two_state_params, 1).to_table(), upper(two_state_params, 1).to_table())
        dist = hulse_stationary(coupled)
        assert dist.plus_first() == Fraction(7, 10)
        assert dist.plus_second() == Fraction(3, 10)
        assert dist.below() == 0


class TestTruncationLedger:
    TABLE = TableKernel.from_strings(2, ["1/5", "1/2", "2/5", "4/5"])

    def test_finite_order_ledger_is_an_equality(self):
        ledger = truncation_ledger(self.TABLE, 0)
        assert ledger.lhs == ledger.rhs
        assert not ledger.certified
        assert ledger.to_dict()["verdict"] == "not_certified"

    def test_ladders_end_at_the_table(self):
        ledger = truncation_ledger(self.TABLE, 0)
        assert ledger.plus_sup[-1] == ledger.plus_inf[-1]
        assert ledger.plus_sup[0] >= ledger.plus_inf[0]

    def test_start_out_of_range(self):
        with pytest.raises(ParameterError):
            truncation_ledger(self.TABLE, 3)

    def test_non_attractive_table(self):
        with pytest.raises(PreconditionError):
            truncation_ledger(TableKernel.from_strings(1, ["3/4", "1/4"]), 0)


class TestMaximalCoupling:
    @pytest.mark.parametrize("r,k", [(0, 0), (1, 1), (2, 2)])
    def test_primed_partition_is_maximal(self, small_params, r, k):
        check = maximal_coupling_check(small_params, r, k)
        assert check.holds
        assert check.ordered
