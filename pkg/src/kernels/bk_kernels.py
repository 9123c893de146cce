"""Bramson-Kalikow kernels: noisy majority rules, the full model and its truncations."""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from src.errors import ContextTooShortError, ParameterError, PreconditionError
from src.kernels.base_kernel import BaseKernel
from src.kernels.params import ModelParams
from src.kernels.partition import Action, IntervalPartition, PartitionRule, assemble
from src.kernels.symbols import Context, SpinSymbol, WindowConvention, majority_bit
from src.utils.logger import get_logger

logger = get_logger(__name__)


def majority_eval(
    a: int,
    ctx: Context,
    m: int,
    epsilon: Fraction,
    convention: WindowConvention = WindowConvention.RECENT,
) -> Fraction:
    """
    Noisy majority rule p_[m](a | ctx).

    Returns 1 - epsilon when a agrees with the sign of the window sum, epsilon
    otherwise. m = 0 is the constant rule P(+1) = 1 - epsilon.

    Raises:
        ParameterError: Even m > 0
        ContextTooShortError: Context shorter than the window span
    """
    symbol = SpinSymbol.parse(a)
    epsilon = Fraction(epsilon)
    if m < 0 or (m > 0 and m % 2 == 0):
        raise ParameterError(f"majority window must be 0 or odd, got {m}")
    if m == 0:
        return 1 - epsilon if symbol == SpinSymbol.PLUS else epsilon
    span = convention.span(m)
    if ctx.order < span:
        raise ContextTooShortError(f"majority window {m} needs {span} past symbols, got {ctx.order}")
    plus = majority_bit(ctx.bits, m, convention)
    agrees = plus == symbol.bit
    return 1 - epsilon if agrees else epsilon


class Variant(str, Enum):
    LOWER = "lower"              # tail emits +1
    UPPER = "upper"              # tail emits -1
    MIXED = "mixed"              # k+1..l emit -1, tail emits +1
    MIXED_PRIME = "mixed_prime"  # k+1..l emit +1, tail emits -1


class TruncatedKernel(BaseKernel):
    """
    Markov truncation of a BK model.

    Components j <= k keep their majority rule; deeper components are
    replaced by constant rules according to the variant.
    """

    def __init__(self, params: ModelParams, variant: Variant, k: int, l: Optional[int] = None):
        if k < 0:
            raise ParameterError(f"truncation index k must be >= 0, got {k}")
        if variant in (Variant.MIXED, Variant.MIXED_PRIME):
            if l is None or l <= k:
                raise ParameterError(f"{variant.value} kernel needs l > k, got k={k}, l={l}")
        elif l is not None:
            raise ParameterError(f"{variant.value} kernel takes no l")
        self.params = params
        self.variant = variant
        self.k = k
        self.l = l
        self.windows: List[int] = params.orders.prefix(k)
        self.order = params.convention.span(self.windows[-1]) if k > 0 else 0
        self.majority_weights: List[Fraction] = [params.lambda_bar(j) for j in range(1, k + 1)]
        self.tail_plus = self._tail_plus()

    @property
    def label(self) -> str:
        if self.l is None:
            return f"{self.variant.value}({self.k})"
        return f"{self.variant.value}({self.k},{self.l})"

    @property
    def attractive_by_construction(self) -> bool:
        return True

    def _tail_plus(self) -> Fraction:
        """Contribution of the constant components to P(+1)."""
        weights = self.params.weights
        noise_free = self.params.noise_free
        if self.variant == Variant.LOWER:
            return noise_free * weights.tail_sum(self.k + 1)
        if self.variant == Variant.UPPER:
            return Fraction(0)
        if self.variant == Variant.MIXED:
            return noise_free * weights.tail_sum(self.l + 1)
        return noise_free * weights.partial_sum(self.k + 1, self.l)

    def prob_plus(self, bits: int) -> Fraction:
        p = self.params.epsilon + self.tail_plus
        convention = self.params.convention
        for window, weight in zip(self.windows, self.majority_weights):
            if majority_bit(bits, window, convention):
                p += weight
        return p

    def mixture_prob_plus(self, bits: int) -> Fraction:
        """
        P(+1 | context) from the un-rewritten mixture of majority rules.

        Independent of prob_plus; used to cross-check the lambda-bar form.
        """
        params = self.params
        eps = params.epsilon
        weights = params.weights
        ctx = Context(bits, self.order)
        p = Fraction(0)
        for j, window in enumerate(self.windows, start=1):
            p += weights.weight(j) * majority_eval(1, ctx, window, eps, params.convention)
        plus_rule = 1 - eps   # p_[0](+1)
        minus_rule = eps      # 1 - p_[0](+1)
        if self.variant == Variant.LOWER:
            p += weights.tail_sum(self.k + 1) * plus_rule
        elif self.variant == Variant.UPPER:
            p += weights.tail_sum(self.k + 1) * minus_rule
        elif self.variant == Variant.MIXED:
            p += weights.partial_sum(self.k + 1, self.l) * minus_rule
            p += weights.tail_sum(self.l + 1) * plus_rule
        else:
            p += weights.partial_sum(self.k + 1, self.l) * plus_rule
            p += weights.tail_sum(self.l + 1) * minus_rule
        return p

    def effective_index(self) -> int:
        return self.l if self.l is not None else self.k

    def update_rule(self) -> PartitionRule:
        return build_partition(self).compile()

    def describe(self) -> Dict[str, Any]:
        descriptor = {"variant": self.variant.value, "k": self.k, **self.params.describe()}
        if self.l is not None:
            descriptor["l"] = self.l
        return descriptor


def lower(params: ModelParams, k: int) -> TruncatedKernel:
    return TruncatedKernel(params, Variant.LOWER, k)


def upper(params: ModelParams, k: int) -> TruncatedKernel:
    return TruncatedKernel(params, Variant.UPPER, k)


def mixed(params: ModelParams, k: int, l: int) -> TruncatedKernel:
    return TruncatedKernel(params, Variant.MIXED, k, l)


def mixed_prime(params: ModelParams, k: int, l: int) -> TruncatedKernel:
    return TruncatedKernel(params, Variant.MIXED_PRIME, k, l)


# ============================================================================
# Interval partitions
# ============================================================================

def _head(params: ModelParams, windows: List[int]) -> List[Tuple[Fraction, Action]]:
    """Base cells followed by one majority cell per resolved component."""
    eps = params.epsilon
    pieces = [(eps, Action.emit(-1)), (eps, Action.emit(1))]
    for j, window in enumerate(windows, start=1):
        pieces.append((params.lambda_bar(j), Action.majority(window, params.convention)))
    return pieces


def _constant_cells(params: ModelParams, first: int, last: int, symbol: int) -> List[Tuple[Fraction, Action]]:
    """One constant cell of length lambda_bar_j per component j = first..last."""
    return [(params.lambda_bar(j), Action.emit(symbol)) for j in range(first, last + 1)]


def build_partition(kernel: TruncatedKernel, truncation_index: Optional[int] = None) -> IntervalPartition:
    """
    Interval partition whose update function realizes a truncated kernel.

    Every component j <= truncation_index gets its own cell of length
    lambda_bar_j: a majority cell up to the resolved index, a constant cell
    beyond it. Components past truncation_index share the residual cell.

    Args:
        kernel: Lower/Upper/Mixed/MixedPrime kernel
        truncation_index: Deepest component with its own cell; must be at
            least the kernel's effective index (k, or l for mixed variants)

    Returns:
        IntervalPartition with the tail beyond truncation_index in the residual cell

    Raises:
        ParameterError: truncation_index too small to fix every explicit action
    """
    K = kernel.effective_index() if truncation_index is None else truncation_index
    if K < kernel.effective_index():
        raise ParameterError(
            f"truncation index {K} cannot disambiguate {kernel.label}; need >= {kernel.effective_index()}"
        )
    params = kernel.params
    weights = params.weights
    noise_free = params.noise_free
    pieces = _head(params, kernel.windows)

    if kernel.variant in (Variant.LOWER, Variant.UPPER):
        tail_symbol = 1 if kernel.variant == Variant.LOWER else -1
        pieces += _constant_cells(params, kernel.k + 1, K, tail_symbol)
    else:
        block_symbol = -1 if kernel.variant == Variant.MIXED else 1
        tail_symbol = -block_symbol
        pieces += _constant_cells(params, kernel.k + 1, kernel.l, block_symbol)
        pieces += _constant_cells(params, kernel.l + 1, K, tail_symbol)
    residual = (noise_free * weights.tail_sum(K + 1), Action.emit(tail_symbol))

    return assemble(pieces, residual, kernel.order, kernel.label)


def build_primed_partition(params: ModelParams, r: int, k: int) -> IntervalPartition:
    """
    Reordered partition realizing mixed_prime(r, k+1).

    The -1 tail block (components j >= k+2) comes right after the majority
    cells, followed by the +1 block of components r+1..k+1. Driven by the
    same uniform as build_partition(mixed(r, k+1)), it couples the two
    kernels so that the primed chain never exceeds the standard one.

    Raises:
        ParameterError: r >= k+1
    """
    if not 0 <= r < k + 1:
        raise ParameterError(f"primed partition needs 0 <= r < k+1, got r={r}, k={k}")
    kernel = mixed_prime(params, r, k + 1)
    weights = params.weights
    noise_free = params.noise_free
    pieces = _head(params, kernel.windows)
    pieces.append((noise_free * weights.tail_sum(k + 2), Action.emit(-1)))
    residual = (noise_free * weights.partial_sum(r + 1, k + 1), Action.emit(1))
    return assemble(pieces, residual, kernel.order, f"primed({r},{k + 1})")


# ============================================================================
# Full model
# ============================================================================

@dataclass(frozen=True)
class FullBK:
    """The infinite-order BK model; only bounded evaluation is possible."""

    params: ModelParams

    @property
    def label(self) -> str:
        return "full"

    def describe(self) -> Dict[str, Any]:
        return {"variant": "full", **self.params.describe()}

    def evaluate(self, a: int, ctx: Context) -> Fraction:
        lo, hi = bk_eval_bounded(self.params, a, ctx)
        if lo != hi:
            raise PreconditionError(
                "context does not resolve the full model; use bk_eval_bounded",
                {"width": str(hi - lo)},
            )
        return lo


def resolved_components(params: ModelParams, order: int) -> int:
    """Number J of leading components whose windows fit in a context of this order."""
    J = 0
    support = params.weights.support()
    while True:
        j = J + 1
        if support is not None and j > support:
            return J
        m = params.orders.exact_or_none(j)
        if m is None or params.convention.span(m) > order:
            return J
        J = j


def bk_eval_bounded(params: ModelParams, a: int, ctx: Context) -> Tuple[Fraction, Fraction]:
    """
    Enclosure of p(a | x) over every infinite past x extending ctx.

    Components with windows inside the context are resolved exactly; the
    remaining mass (1 - 2 eps) * sum of unresolved lambda_j is the width.

    Raises:
        ContextTooShortError: ctx shorter than the first window
    """
    symbol = SpinSymbol.parse(a)
    first = params.orders.exact(1)
    if ctx.order < params.convention.span(first):
        raise ContextTooShortError(
            f"context of order {ctx.order} is shorter than the first window m_1 = {first}"
        )
    J = resolved_components(params, ctx.order)
    lo = params.epsilon
    for j in range(1, J + 1):
        if majority_bit(ctx.bits, params.order(j), params.convention):
            lo += params.lambda_bar(j)
    width = params.noise_free * params.weights.tail_sum(J + 1)
    hi = lo + width
    if symbol == SpinSymbol.PLUS:
        return lo, hi
    return 1 - hi, 1 - lo


class PrimedMixedKernel(TruncatedKernel):
    """mixed_prime(r, k+1) simulated through the reordered (primed) partition."""

    def __init__(self, params: ModelParams, r: int, k: int):
        super().__init__(params, Variant.MIXED_PRIME, r, k + 1)

    @property
    def label(self) -> str:
        return f"primed({self.k},{self.l})"

    def update_rule(self) -> PartitionRule:
        return build_primed_partition(self.params, self.k, self.l - 1).compile()

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "partition": "primed"}
