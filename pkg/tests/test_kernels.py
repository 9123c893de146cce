"""Kernels: probabilities, partitions, factories and the full model's enclosures."""

from fractions import Fraction

import numpy as np
import pytest

from src.errors import ConfigError, ContextTooShortError, ParameterError, PreconditionError
from src.kernels.bk_kernels import (
    FullBK,
    PrimedMixedKernel,
    bk_eval_bounded,
    build_partition,
    build_primed_partition,
    lower,
    mixed,
    mixed_prime,
    upper,
)
from src.kernels.kernel_factory import create_kernel
from src.kernels.orders import ExplicitOrders, TowerOrders, create_orders
from src.kernels.params import ModelParams
from src.kernels.symbols import Context, WindowConvention, majority_bit
from src.kernels.table_kernel import (
    TableKernel,
    check_attractive,
    dominates,
    inf_truncation,
    random_attractive_table,
    sup_truncation,
)
from src.kernels.weights import Corollary1Weights, Corollary2Weights, create_weights

PLUS, MINUS = 1, 0


class TestTwoStateKernel:
    def test_lower_probabilities(self, two_state_params):
        g = lower(two_state_params, 1)
        assert g.order == 1
        assert g.prob_plus(PLUS) == Fraction(3, 4)
        assert g.prob_plus(MINUS) == Fraction(7, 12)

    def test_upper_probabilities(self, two_state_params):
        g = upper(two_state_params, 1)
        assert g.prob_plus(PLUS) == Fraction(5, 12)
        assert g.prob_plus(MINUS) == Fraction(1, 4)

    def test_order_zero_truncations(self, two_state_params):
        assert lower(two_state_params, 0).order == 0
        assert lower(two_state_params, 0).prob_plus(0) == Fraction(3, 4)
        assert upper(two_state_params, 0).prob_plus(0) == Fraction(1, 4)

    def test_evaluate_minus_symbol(self, two_state_params):
        g = lower(two_state_params, 1)
        assert g.evaluate(-1, Context.of([1, -1, -1])) == Fraction(1, 4)

    def test_evaluate_short_context(self, small_params):
        with pytest.raises(ContextTooShortError):
            lower(small_params, 2).evaluate(1, Context.of([1, 1]))


class TestMixtureForm:
    @pytest.mark.parametrize(
        "build",
        [
            lambda p: lower(p, 2),
            lambda p: upper(p, 3),
            lambda p: mixed(p, 1, 3),
            lambda p: mixed_prime(p, 0, 2),
        ],
        ids=["lower", "upper", "mixed", "mixed_prime"],
    )
    def test_lambda_bar_form_matches_mixture(self, small_params, build):
        g = build(small_params)
        for bits in range(1 << g.order):
            assert g.prob_plus(bits) == g.mixture_prob_plus(bits)

    def test_partition_plus_measure(self, small_params):
        for g in (lower(small_params, 3), upper(small_params, 2), mixed(small_params, 1, 2)):
            partition = build_partition(g)
            assert partition.total_length() == 1
            for bits in range(1 << g.order):
                assert partition.plus_measure(bits) == g.prob_plus(bits)

    def test_mixed_block_has_one_cell_per_component(self, small_params):
        partition = build_partition(mixed(small_params, 1, 3))
        block = partition.cells[3:]
        assert [c.length for c in block] == [small_params.lambda_bar(2), small_params.lambda_bar(3)]
        assert [str(c.action) for c in block] == ["Emit(-1)", "Emit(-1)"]
        assert partition.residual.length == small_params.noise_free * small_params.weights.tail_sum(4)

    def test_truncation_index_splits_the_tail(self, small_params):
        g = lower(small_params, 1)
        coarse = build_partition(g)
        fine = build_partition(g, truncation_index=3)
        assert len(fine.cells) == len(coarse.cells) + 2
        assert [c.length for c in fine.cells[3:]] == [small_params.lambda_bar(2), small_params.lambda_bar(3)]
        for bits in range(1 << g.order):
            assert fine.plus_measure(bits) == coarse.plus_measure(bits) == g.prob_plus(bits)

    def test_truncation_index_below_effective_index(self, small_params):
        with pytest.raises(ParameterError):
            build_partition(mixed(small_params, 1, 3), truncation_index=2)

    def test_primed_partition_has_mixed_prime_law(self, small_params):
        partition = build_primed_partition(small_params, 1, 1)
        g = mixed_prime(small_params, 1, 2)
        assert partition.total_length() == 1
        for bits in range(1 << g.order):
            assert partition.plus_measure(bits) == g.prob_plus(bits)

    def test_primed_kernel_label(self, small_params):
        assert PrimedMixedKernel(small_params, 0, 1).label == "primed(0,2)"


class TestVariantChecks:
    def test_mixed_needs_l(self, small_params):
        with pytest.raises(ParameterError):
            mixed(small_params, 2, 2)

    def test_negative_k(self, small_params):
        with pytest.raises(ParameterError):
            lower(small_params, -1)

    def test_lower_dominates_upper(self, small_params):
        assert dominates(lower(small_params, 2), upper(small_params, 2))
        assert not dominates(upper(small_params, 2), lower(small_params, 2))

    def test_lower_ladder_decreases(self, small_params):
        assert dominates(lower(small_params, 1), lower(small_params, 2))
        assert dominates(upper(small_params, 2), upper(small_params, 1))

    def test_truncations_are_attractive(self, small_params):
        for g in (lower(small_params, 3), mixed(small_params, 0, 2)):
            assert g.check_attractive()


class TestParameters:
    def test_epsilon_range(self):
        with pytest.raises(ParameterError):
            ModelParams(Fraction(1, 2), Corollary1Weights(), ExplicitOrders([1]))

    def test_even_order_rejected(self):
        with pytest.raises(ParameterError):
            ExplicitOrders([1, 4])

    def test_orders_must_increase(self):
        with pytest.raises(ParameterError):
            ExplicitOrders([3, 3])

    def test_lambda_bar(self, two_state_params):
        assert two_state_params.lambda_bar(0) == Fraction(1, 2)
        assert two_state_params.lambda_bar(1) == Fraction(1, 6)

    def test_skip_one_span(self):
        params = ModelParams(Fraction(1, 4), Corollary1Weights(), ExplicitOrders([1, 3]), WindowConvention.SKIP_ONE)
        assert lower(params, 2).order == 4

    def test_majority_bit_conventions(self):
        # symbols (+1, -1, -1): the recent window of 3 is negative, the skip-one window of 1 too
        bits = 0b001
        assert majority_bit(bits, 3) == 0
        assert majority_bit(bits, 1) == 1
        assert majority_bit(bits, 1, WindowConvention.SKIP_ONE) == 0


class TestWeights:
    def test_corollary1_sums_to_one(self):
        w = Corollary1Weights()
        assert w.tail_sum(1) == 1
        assert w.weight(1) == Fraction(1, 3)
        assert w.tail_sum(3) == Fraction(3, 2) * Fraction(2, 3) ** 3

    def test_corollary2_block_weights(self):
        w = Corollary2Weights(1)
        assert w.tail_sum(1) == 1
        assert w.partial_sum(1, 1) == w.weight(1)

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            create_weights({"kind": "harmonic"})

    def test_tower_orders(self):
        orders = TowerOrders()
        assert orders.exact(1) == 217
        assert orders.exact(2) == 577 ** 217

    def test_unknown_order_formula(self):
        with pytest.raises(ConfigError):
            create_orders({"formula": "fibonacci"})


class TestFullModel:
    def test_enclosure_brackets_truncations(self, two_state_params):
        ctx = Context.of([1])
        lo, hi = bk_eval_bounded(two_state_params, 1, ctx)
        assert lo == upper(two_state_params, 1).prob_plus(PLUS)
        assert hi == lower(two_state_params, 1).prob_plus(PLUS)

    def test_minus_symbol_enclosure(self, two_state_params):
        lo, hi = bk_eval_bounded(two_state_params, -1, Context.of([1]))
        assert (lo, hi) == (Fraction(1, 4), Fraction(7, 12))

    def test_short_context(self, small_params):
        with pytest.raises(ContextTooShortError):
            bk_eval_bounded(small_params, 1, Context.empty())

    def test_unresolved_evaluate(self, two_state_params):
        with pytest.raises(PreconditionError):
            FullBK(two_state_params).evaluate(1, Context.of([1, 1, 1]))


class TestTables:
    VALUES = ["1/5", "1/2", "2/5", "4/5"]

    def test_table_is_attractive(self):
        assert check_attractive(TableKernel.from_strings(2, self.VALUES))

    def test_sup_and_inf_truncations(self):
        g = TableKernel.from_strings(2, self.VALUES)
        assert sup_truncation(g, 1).values == (Fraction(2, 5), Fraction(4, 5))
        assert inf_truncation(g, 1).values == (Fraction(1, 5), Fraction(1, 2))

    def test_non_attractive_table(self):
        assert not check_attractive(TableKernel.from_strings(1, ["3/4", "1/4"]))

    @pytest.mark.parametrize("order", range(9))
    def test_random_tables_are_attractive(self, order):
        g = random_attractive_table(order, np.random.default_rng(order))
        assert g.order == order
        assert g.strictly_positive
        assert check_attractive(g)

    def test_random_tables_follow_the_seed(self):
        first = random_attractive_table(4, np.random.default_rng(9))
        second = random_attractive_table(4, np.random.default_rng(9))
        assert first == second


class TestFactory:
    def test_descriptor(self):
        g = create_kernel({
            "variant": "lower",
            "k": 1,
            "epsilon": "1/4",
            "weights": {"kind": "corollary1"},
            "orders": [1],
        })
        assert g.label == "lower(1)"
        assert g.prob_plus(PLUS) == Fraction(3, 4)

    def test_describe_rebuilds_kernel(self, small_params):
        g = mixed(small_params, 1, 2)
        rebuilt = create_kernel(g.describe())
        assert rebuilt.label == g.label
        assert all(rebuilt.prob_plus(b) == g.prob_plus(b) for b in range(1 << g.order))

    def test_full_variant(self):
        g = create_kernel({"variant": "full", "epsilon": "1/4", "weights": {"kind": "corollary1"}, "orders": [1]})
        assert isinstance(g, FullBK)

    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            create_kernel({"variant": "sideways"})

    def test_missing_field(self):
        with pytest.raises(ConfigError):
            create_kernel({"variant": "lower", "k": 1, "epsilon": "1/4"})
