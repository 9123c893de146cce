"""Couplings of two finite-order kernels: the Hulse kernel, shared-uniform
pair chains, exact d-bar for ordered attractive pairs and truncation ledgers."""

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from src.errors import DominationError, ParameterError, PreconditionError, StateSpaceCapError
from src.exact.transfer import (
    Number,
    RuelleLimits,
    SolveMethod,
    _require_finite,
    indicator_plus,
    marginal_plus,
    ruelle_iterate,
    solve_rows,
    stationary,
)
from src.kernels.base_kernel import BaseKernel
from src.kernels.bk_kernels import build_partition, build_primed_partition, mixed
from src.kernels.params import ModelParams
from src.kernels.partition import UpdateRule, shared_uniform_pieces
from src.kernels.symbols import mask, push
from src.kernels.table_kernel import TableKernel, check_attractive, dominates, inf_truncation, sup_truncation
from src.utils.config_loader import ExactSettings, default_settings
from src.utils.logger import get_logger
from src.utils.rationals import qstr

logger = get_logger(__name__)

Pair = Tuple[int, int]
Joint = Tuple[Fraction, Fraction, Fraction, Fraction]  # (++, +-, -+, --)


def _render(value: Number) -> Union[str, float]:
    return qstr(value) if isinstance(value, Fraction) else float(value)


# ============================================================================
# Hulse coupling
# ============================================================================

@dataclass(frozen=True)
class CoupledKernel:
    """
    Joint kernel of two tables of the same order.

    p(+x, +y) = min(gA(+x), gB(+y)); the other three entries follow from
    the marginal constraints.
    """

    a: TableKernel
    b: TableKernel

    @property
    def order(self) -> int:
        return self.a.order

    def joint(self, x: int, y: int) -> Joint:
        ga, gb = self.a.prob_plus(x), self.b.prob_plus(y)
        pp = min(ga, gb)
        return pp, ga - pp, gb - pp, 1 - max(ga, gb)

    def pair_rows(self, order: int, pairs: List[Pair], index: Dict[Pair, int]) -> List[List[Tuple[int, Fraction]]]:
        rows = []
        own = mask(self.order)
        for x, y in pairs:
            pp, pm, mp, mm = self.joint(x & own, y & own)
            row = []
            for (ba, bb), p in (((1, 1), pp), ((1, 0), pm), ((0, 1), mp), ((0, 0), mm)):
                if p:
                    row.append((index[(push(x, ba, order), push(y, bb, order))], p))
            rows.append(row)
        return rows


def hulse_coupling(gA: TableKernel, gB: TableKernel) -> CoupledKernel:
    """
    Build the Hulse coupling of two attractive, strictly positive tables.

    Raises:
        ParameterError: Different orders
        PreconditionError: Non-attractive or not strictly positive input
    """
    if gA.order != gB.order:
        raise ParameterError(f"coupled tables must share an order, got {gA.order} and {gB.order}")
    for g in (gA, gB):
        if not g.strictly_positive:
            raise PreconditionError("Hulse coupling needs strictly positive kernels", {"kernel": g.label})
        if not check_attractive(g):
            raise PreconditionError("Hulse coupling needs attractive kernels", {"kernel": g.label})
    coupled = CoupledKernel(gA, gB)
    for x in range(1 << gA.order):
        for y in range(1 << gB.order):
            if min(coupled.joint(x, y)) < 0:
                raise PreconditionError("negative coupled entry", {"x": x, "y": y})
    return coupled


# ============================================================================
# Pair chains
# ============================================================================

@dataclass
class PairDistribution:
    """
    Stationary law of a pair chain on its recurrent class.

    Attributes:
        order: Context order of both coordinates
        pairs: States (x, y), in index order
        weights: Fractions (rational solve) or floats
        method: Solver used
        residual: Stationarity residual
    """

    order: int
    pairs: List[Pair]
    weights: Union[List[Fraction], np.ndarray]
    method: str
    residual: float

    @property
    def exact(self) -> bool:
        return self.method == SolveMethod.RATIONAL

    def _sum(self, predicate) -> Number:
        if self.exact:
            return sum((w for (x, y), w in zip(self.pairs, self.weights) if predicate(x, y)), Fraction(0))
        return float(sum(w for (x, y), w in zip(self.pairs, self.weights) if predicate(x, y)))

    def disagreement(self) -> Number:
        """nu(x_0 != y_0)."""
        return self._sum(lambda x, y: (x ^ y) & 1)

    def below(self) -> Number:
        """nu(x_0 < y_0)."""
        return self._sum(lambda x, y: not x & 1 and y & 1)

    def plus_first(self) -> Number:
        return self._sum(lambda x, y: x & 1)

    def plus_second(self) -> Number:
        return self._sum(lambda x, y: y & 1)

    def summary(self) -> Dict[str, Any]:
        return {
            "order": self.order,
            "states": len(self.pairs),
            "method": self.method,
            "residual": self.residual,
            "disagreement": _render(self.disagreement()),
            "below": _render(self.below()),
            "plus_first": _render(self.plus_first()),
            "plus_second": _render(self.plus_second()),
        }


def _reachable(successors, start: Pair, cap: int) -> Tuple[List[Pair], Dict[Pair, int]]:
    pairs = [start]
    index = {start: 0}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        for nxt in successors(state):
            if nxt not in index:
                if len(pairs) >= cap:
                    raise StateSpaceCapError(
                        f"pair chain exceeds {cap} reachable states", {"cap": cap}
                    )
                index[nxt] = len(pairs)
                pairs.append(nxt)
                queue.append(nxt)
    return pairs, index


def _shared_transitions(rule_a: UpdateRule, rule_b: UpdateRule, order: int):
    own_a, own_b = mask(rule_a.order), mask(rule_b.order)
    cache: Dict[Pair, List[Tuple[Fraction, int, int]]] = {}

    def pieces(x: int, y: int) -> List[Tuple[Fraction, int, int]]:
        key = (x & own_a, y & own_b)
        if key not in cache:
            cache[key] = [p for p in shared_uniform_pieces(rule_a, key[0], rule_b, key[1]) if p[0]]
        return cache[key]

    def successors(state: Pair) -> List[Pair]:
        x, y = state
        return [(push(x, ba, order), push(y, bb, order)) for _, ba, bb in pieces(x, y)]

    return pieces, successors


def coupled_stationary(
    rule_a: UpdateRule,
    rule_b: UpdateRule,
    order: Optional[int] = None,
    settings: Optional[ExactSettings] = None,
) -> PairDistribution:
    """
    Stationary law of two update rules driven by the same uniform.

    The chain is restricted to the pairs reachable from the all-minus pair,
    which belongs to the unique recurrent class whenever both rules emit -1
    together with positive probability.
    """
    settings = settings or default_settings().exact
    order = max(rule_a.order, rule_b.order, 1) if order is None else order
    pieces, successors = _shared_transitions(rule_a, rule_b, order)
    pairs, index = _reachable(successors, (0, 0), settings.sparse_cap_states)
    rows = []
    for x, y in pairs:
        rows.append([(index[(push(x, ba, order), push(y, bb, order))], length) for length, ba, bb in pieces(x, y)])
    weights, residual, method = solve_rows(rows, settings)
    logger.debug(f"Pair chain: {len(pairs)} recurrent states, method={method}")
    return PairDistribution(order, pairs, weights, method, residual)


def hulse_stationary(coupled: CoupledKernel, settings: Optional[ExactSettings] = None) -> PairDistribution:
    """Stationary law of the Hulse-coupled pair chain."""
    settings = settings or default_settings().exact
    order = max(coupled.order, 1)
    own = mask(coupled.order)

    def successors(state: Pair) -> List[Pair]:
        x, y = state
        out = []
        for (ba, bb), p in zip(((1, 1), (1, 0), (0, 1), (0, 0)), coupled.joint(x & own, y & own)):
            if p:
                out.append((push(x, ba, order), push(y, bb, order)))
        return out

    pairs, index = _reachable(successors, (0, 0), settings.sparse_cap_states)
    weights, residual, method = solve_rows(coupled.pair_rows(order, pairs, index), settings)
    return PairDistribution(order, pairs, weights, method, residual)


def pair_forward(
    rule_a: UpdateRule,
    bits_a: int,
    rule_b: UpdateRule,
    bits_b: int,
    steps: int,
    order: Optional[int] = None,
) -> Dict[Pair, Fraction]:
    """
    Exact law of the shared-uniform pair chain after ``steps`` steps from (bits_a, bits_b).

    Returns:
        Mapping (x, y) -> probability, contexts of the common order
    """
    if steps < 0:
        raise ParameterError(f"steps must be nonnegative, got {steps}")
    order = max(rule_a.order, rule_b.order, 1) if order is None else order
    pieces, _ = _shared_transitions(rule_a, rule_b, order)
    law: Dict[Pair, Fraction] = {(bits_a & mask(order), bits_b & mask(order)): Fraction(1)}
    for _ in range(steps):
        nxt: Dict[Pair, Fraction] = {}
        for (x, y), w in law.items():
            for length, ba, bb in pieces(x, y):
                key = (push(x, ba, order), push(y, bb, order))
                nxt[key] = nxt.get(key, Fraction(0)) + w * length
        law = nxt
    return law


def last_symbol_gap(law: Dict[Pair, Fraction]) -> Fraction:
    """P(x_0 = +1) - P(y_0 = +1) under a pair law."""
    return sum((w * ((x & 1) - (y & 1)) for (x, y), w in law.items()), Fraction(0))


# ============================================================================
# Exact d-bar for ordered attractive pairs
# ============================================================================

@dataclass
class DbarExact:
    value: Number
    plus_a: Number
    plus_b: Number
    exact: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dbar": _render(self.value),
            "dbar_float": float(self.value),
            "marginal_plus_a": _render(self.plus_a),
            "marginal_plus_b": _render(self.plus_b),
            "exact": self.exact,
        }


def exact_dbar_attractive(
    kernel_a: BaseKernel, kernel_b: BaseKernel, settings: Optional[ExactSettings] = None
) -> DbarExact:
    """
    d-bar between the stationary laws of two attractive kernels with
    P_a(+1 | x) >= P_b(+1 | x) everywhere: mu_a(x_0 = 1) - mu_b(x_0 = 1).

    Raises:
        DominationError: The pair is not ordered pointwise
        PreconditionError: A non-attractive kernel
    """
    kernel_a, kernel_b = _require_finite(kernel_a), _require_finite(kernel_b)
    for kernel in (kernel_a, kernel_b):
        if not kernel.attractive_by_construction and not kernel.check_attractive():
            raise PreconditionError("exact d-bar identity needs attractive kernels", {"kernel": kernel.label})
    if not dominates(kernel_a, kernel_b):
        raise DominationError(
            f"{kernel_a.label} does not dominate {kernel_b.label} pointwise",
            {"a": kernel_a.label, "b": kernel_b.label},
        )
    da, db = stationary(kernel_a, settings), stationary(kernel_b, settings)
    pa, pb = marginal_plus(da), marginal_plus(db)
    exact = da.exact and db.exact
    value = pa - pb if exact else float(pa) - float(pb)
    return DbarExact(value, pa, pb, exact)


# ============================================================================
# Truncation ledger for attractive tables
# ============================================================================

@dataclass
class TruncationLedger:
    """
    Sup/inf truncation ladders of an attractive table kernel.

    For a finite-order g, lhs == rhs and the perturbation inequality
    lhs < rhs can never be certified.
    """

    k: int
    order: int
    plus_sup: List[Number] = field(default_factory=list)
    plus_inf: List[Number] = field(default_factory=list)
    steps_sup: List[Number] = field(default_factory=list)
    steps_inf: List[Number] = field(default_factory=list)
    lhs: Number = 0
    rhs: Number = 0
    ruelle: Optional[RuelleLimits] = None

    @property
    def slack(self) -> Number:
        return self.rhs - self.lhs

    @property
    def certified(self) -> bool:
        return self.lhs < self.rhs

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "order": self.order,
            "marginal_plus_sup": [_render(v) for v in self.plus_sup],
            "marginal_plus_inf": [_render(v) for v in self.plus_inf],
            "dbar_steps_sup": [_render(v) for v in self.steps_sup],
            "dbar_steps_inf": [_render(v) for v in self.steps_inf],
            "lhs": _render(self.lhs),
            "rhs": _render(self.rhs),
            "slack": _render(self.slack),
            "verdict": "non_unique" if self.certified else "not_certified",
            "ruelle": self.ruelle.to_dict() if self.ruelle else None,
        }


def truncation_ledger(g: TableKernel, k: int, settings: Optional[ExactSettings] = None) -> TruncationLedger:
    """
    mu_j / mu'_j for the sup/inf truncations g_j, g'_j, j = k..M (g_M = g'_M = g),
    the telescoping d-bar sums and d-bar(mu_k, mu'_k).

    Raises:
        ParameterError: k outside [0, M]
        PreconditionError: g not attractive or not strictly positive
    """
    M = g.order
    if not 0 <= k <= M:
        raise ParameterError(f"ledger start k must lie in [0, {M}], got {k}")
    if not check_attractive(g):
        raise PreconditionError("truncation ledger needs an attractive kernel", {"kernel": g.label})
    sups = [sup_truncation(g, j) for j in range(k, M)] + [g]
    infs = [inf_truncation(g, j) for j in range(k, M)] + [g]

    ledger = TruncationLedger(k=k, order=M)
    ledger.plus_sup = [marginal_plus(stationary(t, settings)) for t in sups]
    ledger.plus_inf = [marginal_plus(stationary(t, settings)) for t in infs]
    ledger.steps_sup = [a - b for a, b in zip(ledger.plus_sup, ledger.plus_sup[1:])]
    ledger.steps_inf = [b - a for a, b in zip(ledger.plus_inf, ledger.plus_inf[1:])]
    ledger.lhs = sum(ledger.steps_sup, Fraction(0)) + sum(ledger.steps_inf, Fraction(0))
    ledger.rhs = ledger.plus_sup[0] - ledger.plus_inf[0]
    ledger.ruelle = ruelle_iterate(g, indicator_plus(max(M, 1)), max(M, 1))
    logger.info(f"Truncation ledger k={k}, M={M}: lhs={float(ledger.lhs):.6g}, rhs={float(ledger.rhs):.6g}")
    return ledger


# ============================================================================
# Mixed / MixedPrime maximal coupling
# ============================================================================

@dataclass
class MaximalCouplingCheck:
    """P(Y != Z) against P(Y = 1) - P(Z = 1) for the primed partition coupling."""

    r: int
    k: int
    disagreement: Number
    marginal_gap: Number
    ordered: bool

    @property
    def holds(self) -> bool:
        return self.disagreement == self.marginal_gap

    def to_dict(self) -> Dict[str, Any]:
        return {
            "r": self.r,
            "k": self.k,
            "disagreement": _render(self.disagreement),
            "marginal_gap": _render(self.marginal_gap),
            "never_below": self.ordered,
            "holds": self.holds,
        }


def maximal_coupling_check(params: ModelParams, r: int, k: int, settings: Optional[ExactSettings] = None) -> MaximalCouplingCheck:
    """
    Drive mixed(r, k+1) by its standard partition and mixed_prime(r, k+1)
    by the primed partition from one uniform; compare the stationary
    disagreement with the difference of +1 marginals.
    """
    standard = build_partition(mixed(params, r, k + 1)).compile()
    primed = build_primed_partition(params, r, k).compile()
    dist = coupled_stationary(standard, primed, settings=settings)
    below = dist.below()
    check = MaximalCouplingCheck(
        r=r,
        k=k,
        disagreement=dist.disagreement(),
        marginal_gap=dist.plus_first() - dist.plus_second(),
        ordered=below == 0,
    )
    if not check.holds:
        logger.warning(
            f"Maximal coupling identity fails at r={r}, k={k}: "
            f"P(Y!=Z)={float(check.disagreement):.6g}, gap={float(check.marginal_gap):.6g}"
        )
    return check
