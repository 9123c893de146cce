"""A_k, the order condition m_{k+1} >= A_k / gap_k**2, the d-bar ledger and
the per-step d-bar bound, all in exact or log2-space arithmetic."""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

from src.bounds import logspace
from src.bounds.lemmas import eta_mean_bound, weight_gap
from src.bounds.logspace import LogSpaceValue, Outcome, Representation, as_logspace, ceil_int
from src.errors import (
    ConfigError,
    HypothesisError,
    MissingTailRuleError,
    ParameterError,
    UnrepresentableError,
)
from src.kernels.orders import ExplicitOrders
from src.kernels.params import ModelParams
from src.kernels.symbols import WindowConvention
from src.kernels.weights import WeightFamily
from src.utils.logger import get_logger
from src.utils.rationals import qstr

logger = get_logger(__name__)

Value = Union[int, Fraction, LogSpaceValue]


# ============================================================================
# r-functions
# ============================================================================

class RFunction:
    """Total function r on k >= 1 with 0 <= r(k) < k, validated on each call."""

    def __init__(self, name: str, fn: Callable[[int], int], params: Optional[Dict[str, Any]] = None):
        self.name = name
        self._fn = fn
        self.params = params or {}

    def __call__(self, k: int) -> int:
        if k < 1:
            raise ParameterError(f"r is defined for k >= 1, got {k}")
        value = int(self._fn(k))
        if not 0 <= value < k:
            raise ParameterError(f"r({k}) = {value} violates 0 <= r(k) < k", {"r": self.name})
        return value

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.name, **self.params}


def r_predecessor() -> RFunction:
    """r(k) = k - 1."""
    return RFunction("predecessor", lambda k: k - 1)


def r_zero() -> RFunction:
    return RFunction("zero", lambda k: 0)


def r_block_root(c: int) -> RFunction:
    """r(k) = floor(sqrt(log2 k) / c): the largest t with 2**((t c)**2) <= k."""

    def fn(k: int) -> int:
        t = 0
        while (((t + 1) * c) ** 2) < k.bit_length():
            t += 1
        return t

    return RFunction("block_root", fn, {"c": c})


def r_table(values: Sequence[int]) -> RFunction:
    """r(k) = values[k-1]."""
    values = [int(v) for v in values]

    def fn(k: int) -> int:
        if k > len(values):
            raise ParameterError(f"r({k}) is not listed (table has {len(values)} entries)")
        return values[k - 1]

    return RFunction("table", fn, {"values": values})


def create_r_function(descriptor: Dict[str, Any]) -> RFunction:
    """
    Raises:
        ConfigError: Unknown kind
    """
    kind = descriptor.get("kind", "predecessor")
    if kind == "predecessor":
        return r_predecessor()
    elif kind == "zero":
        return r_zero()
    elif kind == "block_root":
        return r_block_root(int(descriptor["c"]))
    elif kind == "table":
        return r_table(descriptor["values"])
    raise ConfigError(
        f"Unknown r-function: {kind!r}",
        {"supported": ["predecessor", "zero", "block_root", "table"]},
    )


# ============================================================================
# Comparisons with provenance
# ============================================================================

@dataclass
class Comparison:
    """A decided (or indeterminate) inequality lhs <relation> rhs."""

    name: str
    lhs: LogSpaceValue
    rhs: LogSpaceValue
    relation: str
    outcome: Outcome
    note: str = ""

    @classmethod
    def evaluate(cls, name: str, lhs: Value, relation: str, rhs: Value, note: str = "") -> "Comparison":
        lhs, rhs = as_logspace(lhs), as_logspace(rhs)
        if relation == "<=":
            outcome = lhs.le(rhs)
        elif relation == "<":
            outcome = lhs.lt(rhs)
        elif relation == ">=":
            outcome = lhs.ge(rhs)
        elif relation == ">":
            outcome = rhs.lt(lhs)
        else:
            raise ParameterError(f"unknown relation {relation!r}")
        return cls(name, lhs, rhs, relation, outcome, note)

    @property
    def representation(self) -> Representation:
        if self.lhs.is_exact and self.rhs.is_exact:
            return Representation.EXACT
        return Representation.LOG2

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "lhs": self.lhs.to_dict(),
            "relation": self.relation,
            "rhs": self.rhs.to_dict(),
            "representation": self.representation.value,
            "rounding": "none" if self.representation == Representation.EXACT else "outward",
            "outcome": self.outcome.value,
            "note": self.note,
        }


def unrepresentable(name: str, error: UnrepresentableError) -> Dict[str, Any]:
    return {"name": name, "outcome": Outcome.INDETERMINATE.value, "note": f"unrepresentable: {error.message}"}


# ============================================================================
# A_k and the order condition
# ============================================================================

def _check_alpha(epsilon: Fraction, alpha: Fraction) -> None:
    if not 0 < alpha < Fraction(1, 2) - epsilon:
        raise ParameterError(
            f"alpha must satisfy 0 < alpha < 1/2 - epsilon, got alpha={alpha}, epsilon={epsilon}"
        )


def compute_A_k(params: ModelParams, r_func: RFunction, alpha: Fraction, k: int) -> LogSpaceValue:
    """
    A_0 = 8 (1-2eps)^-2 ln(4/alpha);
    A_k = 8 (1-2eps)^-2 (1 + m_r (2eps)^-m_r)^2 ln(2^(k+2) (1 + m_k (2eps)^-m_k) / alpha),
    r = r(k+1), m_0 = 0.

    Raises:
        ParameterError: alpha out of range or k < 0
    """
    alpha = Fraction(alpha)
    eps = params.epsilon
    _check_alpha(eps, alpha)
    if k < 0:
        raise ParameterError(f"k must be >= 0, got {k}")
    prefactor = LogSpaceValue.of(8 / params.noise_free ** 2)
    if k == 0:
        return prefactor * LogSpaceValue.of(4 / alpha).ln()
    r = r_func(k + 1)
    theta_bar = eta_mean_bound(params.orders.value(r), eps)
    eta_bar = eta_mean_bound(params.orders.value(k), eps)
    inner = LogSpaceValue.of(Fraction(2 ** (k + 2)) / alpha) * (1 + eta_bar)
    return prefactor * (1 + theta_bar) ** 2 * inner.ln()


def proof_gap(params: ModelParams, r_func: RFunction, k: int) -> Fraction:
    """sum_{j >= k+1} lambda_j - sum_{j=r(k)+1}^{k} lambda_j, for k >= 1."""
    r = r_func(k)
    return params.weights.tail_sum(k + 1) - params.weights.partial_sum(r + 1, k)


def order_threshold(params: ModelParams, r_func: RFunction, alpha: Fraction, k: int) -> LogSpaceValue:
    """
    A_k / gap_k**2 with gap_k = sum_{j>=k+2} lambda_j - sum_{j=r(k+1)+1}^{k+1} lambda_j.

    Raises:
        HypothesisError: gap_k <= 0
    """
    gap = weight_gap(params, r_func(k + 1), k)
    if gap <= 0:
        raise HypothesisError(
            f"weight gap at k={k} is not positive",
            {"k": k, "gap": qstr(gap), "r": r_func(k + 1)},
        )
    return compute_A_k(params, r_func, alpha, k) / LogSpaceValue.of(gap ** 2)


def dbar_step_bound(params: ModelParams, r_func: RFunction, k: int) -> LogSpaceValue:
    """
    2 (E[eta_k] + 1) exp(-m_{k+1} gap**2 (1-2eps)**2 / (8 (1 + theta)**2)),
    with both means replaced by m / (2 eps)**m.
    """
    eps = params.epsilon
    r = r_func(k + 1)
    gap = weight_gap(params, r, k)
    theta_bar = eta_mean_bound(params.orders.value(r), eps)
    eta_bar = eta_mean_bound(params.orders.value(k), eps)
    exponent = params.orders.value(k + 1) * LogSpaceValue.of(gap ** 2 * params.noise_free ** 2)
    exponent = exponent / (8 * (1 + theta_bar) ** 2)
    return 2 * (eta_bar + 1) * exponent.exp_neg()


# ============================================================================
# d-bar ledger
# ============================================================================

@dataclass
class LedgerResult:
    """2 * (sum of per-step bounds + tail) against the right side (1 - 2 eps by default)."""

    bounds: List[Fraction]
    tail: Fraction
    lhs: Fraction
    rhs: Fraction
    holds: bool

    @property
    def slack(self) -> Fraction:
        return self.rhs - self.lhs

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bounds": [qstr(b) for b in self.bounds],
            "tail": qstr(self.tail),
            "lhs": qstr(self.lhs),
            "rhs": qstr(self.rhs),
            "slack": qstr(self.slack),
            "holds": self.holds,
        }


def dbar_ledger(
    bounds: Sequence[Fraction],
    epsilon: Fraction,
    tail: Optional[Fraction] = None,
    rhs: Optional[Fraction] = None,
    doubled: bool = True,
) -> LedgerResult:
    """
    Strict perturbation inequality for per-step d-bar bounds.

    Args:
        bounds: d-bar(P_k, P_{k+1}) bounds for the listed k
        epsilon: Noise level
        tail: Certified majorant of the bounds beyond the list
        rhs: Right side (default 1 - 2 eps, the d-bar distance of the two k=0 chains)
        doubled: Count the + and - ladders (symmetric model)

    Raises:
        MissingTailRuleError: No tail majorant
        ParameterError: Negative bound
    """
    if tail is None:
        raise MissingTailRuleError("d-bar ledger needs a majorant for the unlisted tail")
    bounds = [Fraction(b) for b in bounds]
    tail = Fraction(tail)
    if any(b < 0 for b in bounds) or tail < 0:
        raise ParameterError("d-bar bounds must be nonnegative")
    rhs = 1 - 2 * Fraction(epsilon) if rhs is None else Fraction(rhs)
    total = sum(bounds, Fraction(0)) + tail
    lhs = 2 * total if doubled else total
    return LedgerResult(bounds=bounds, tail=tail, lhs=lhs, rhs=rhs, holds=lhs < rhs)


def geometric_ledger(alpha: Fraction, epsilon: Fraction, k_max: int) -> LedgerResult:
    """Ledger with bounds alpha / 2**(k+1), k = 0..k_max, and tail alpha / 2**(k_max+1)."""
    alpha = Fraction(alpha)
    bounds = [alpha / 2 ** (k + 1) for k in range(k_max + 1)]
    return dbar_ledger(bounds, epsilon, tail=alpha / 2 ** (k_max + 1))


# ============================================================================
# Criterium check
# ============================================================================

class Verdict(str, Enum):
    NON_UNIQUENESS_CERTIFIED = "NonUniquenessCertified"
    NOT_CERTIFIED = "NotCertified"


@dataclass
class TailRuleResult:
    """Outcome of a family's inductive argument for every k beyond a handover index."""

    family: str
    from_k: int
    outcome: Outcome
    conditions: List[Dict[str, Any]] = field(default_factory=list)
    description: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "from_k": self.from_k,
            "outcome": self.outcome.value,
            "conditions": self.conditions,
            "description": self.description,
        }


TailRule = Callable[[int], TailRuleResult]


@dataclass
class KCheck:
    """Order condition at one k."""

    k: int
    r: int
    gap: Fraction
    proof_gap: Optional[Fraction]
    A_k: Optional[LogSpaceValue]
    threshold: Optional[LogSpaceValue]
    order: Optional[LogSpaceValue]
    satisfied: Outcome
    direct: Outcome = Outcome.INDETERMINATE
    dbar_bound: Optional[LogSpaceValue] = None
    ledger_bound: Fraction = Fraction(0)
    accepted_by: str = "direct"
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        def dump(v: Optional[LogSpaceValue]) -> Optional[Dict[str, Any]]:
            return v.to_dict() if v is not None else None

        return {
            "k": self.k,
            "r": self.r,
            "gap": qstr(self.gap),
            "proof_gap": qstr(self.proof_gap) if self.proof_gap is not None else None,
            "A_k": dump(self.A_k),
            "threshold": dump(self.threshold),
            "m_next": dump(self.order),
            "satisfied": self.satisfied.value,
            "direct": self.direct.value,
            "accepted_by": self.accepted_by,
            "dbar_step_bound": dump(self.dbar_bound),
            "ledger_bound": qstr(self.ledger_bound),
            "note": self.note,
        }


@dataclass
class CriteriumReport:
    """Per-k ledger, chain steps, tail rule, d-bar ledger and verdict."""

    family: str
    epsilon: Fraction
    alpha: Fraction
    k_max: int
    policy: str
    per_k: List[KCheck] = field(default_factory=list)
    chain_steps: List[Dict[str, Any]] = field(default_factory=list)
    discrepancies: List[Dict[str, Any]] = field(default_factory=list)
    tail: Optional[TailRuleResult] = None
    ledger: Optional[LedgerResult] = None
    verdict: Verdict = Verdict.NOT_CERTIFIED
    reasons: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    params: Dict[str, Any] = field(default_factory=dict)

    def decide(self) -> Verdict:
        """Certified only if every k is accepted, the tail rule holds and the ledger is strict."""
        self.reasons = []
        for check in self.per_k:
            if check.satisfied != Outcome.YES:
                self.reasons.append(f"order condition at k={check.k}: {check.satisfied.value}")
        if self.tail is None:
            self.reasons.append("no inductive tail rule")
        elif self.tail.outcome != Outcome.YES:
            self.reasons.append(f"tail rule from k={self.tail.from_k}: {self.tail.outcome.value}")
        if self.ledger is None or not self.ledger.holds:
            self.reasons.append("d-bar ledger is not strict")
        self.verdict = Verdict.NOT_CERTIFIED if self.reasons else Verdict.NON_UNIQUENESS_CERTIFIED
        return self.verdict

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "epsilon": qstr(self.epsilon),
            "alpha": qstr(self.alpha),
            "k_max": self.k_max,
            "policy": self.policy,
            "params": self.params,
            "per_k": [c.to_dict() for c in self.per_k],
            "chain_steps": self.chain_steps,
            "discrepancies": self.discrepancies,
            "tail_rule": self.tail.to_dict() if self.tail else None,
            "ledger": self.ledger.to_dict() if self.ledger else None,
            "verdict": self.verdict.value,
            "reasons": self.reasons,
            "notes": self.notes,
        }


def check_order_condition(params: ModelParams, r_func: RFunction, alpha: Fraction, k: int) -> KCheck:
    """
    m_{k+1} >= A_k / gap_k**2 at one k, with both gap forms and the per-step d-bar bound.

    Raises:
        HypothesisError: gap_k <= 0
    """
    alpha = Fraction(alpha)
    r = r_func(k + 1)
    gap = weight_gap(params, r, k)
    if gap <= 0:
        raise HypothesisError(
            f"weight gap at k={k} is not positive",
            {"k": k, "gap": qstr(gap), "r": r},
        )
    check = KCheck(
        k=k,
        r=r,
        gap=gap,
        proof_gap=proof_gap(params, r_func, k) if k >= 1 else None,
        A_k=None,
        threshold=None,
        order=None,
        satisfied=Outcome.INDETERMINATE,
        ledger_bound=alpha / 2 ** (k + 1),
    )
    try:
        check.A_k = compute_A_k(params, r_func, alpha, k)
        check.threshold = check.A_k / LogSpaceValue.of(gap ** 2)
        check.order = params.orders.value(k + 1)
        check.satisfied = check.order.ge(check.threshold)
        check.direct = check.satisfied
    except UnrepresentableError as e:
        check.note = f"unrepresentable: {e.message}"
        logger.warning(f"Order condition at k={k} is unrepresentable: {e.message}")
    try:
        check.dbar_bound = dbar_step_bound(params, r_func, k)
    except UnrepresentableError:
        check.dbar_bound = None
    if check.proof_gap is not None and check.proof_gap <= 0:
        check.note = (check.note + "; " if check.note else "") + "proof-form gap is not positive"
    logger.debug(f"k={k}: threshold={check.threshold.approx() if check.threshold else None}, satisfied={check.satisfied.value}")
    return check


def theorem3_check(
    params: ModelParams,
    r_func: RFunction,
    alpha: Fraction,
    k_max: int,
    tail_rule: Optional[TailRule] = None,
    family: str = "custom",
    require_tail: bool = True,
) -> CriteriumReport:
    """
    Check m_{k+1} >= A_k / gap_k**2 for k = 0..k_max, apply the tail rule for
    k > k_max and assemble the d-bar ledger with bounds alpha / 2**(k+1).

    Raises:
        ParameterError: alpha out of range
        HypothesisError: gap_k <= 0 for some inspected k
        MissingTailRuleError: No tail rule and require_tail
    """
    alpha = Fraction(alpha)
    _check_alpha(params.epsilon, alpha)
    if tail_rule is None and require_tail:
        raise MissingTailRuleError(
            f"no inductive tail rule registered for family '{family}'",
            {"family": family},
        )
    report = CriteriumReport(
        family=family,
        epsilon=params.epsilon,
        alpha=alpha,
        k_max=k_max,
        policy="direct",
        params={**params.describe(), "r": r_func.describe()},
    )
    for k in range(k_max + 1):
        report.per_k.append(check_order_condition(params, r_func, alpha, k))
        if report.per_k[-1].proof_gap is not None:
            pg = report.per_k[-1].proof_gap
            if pg <= 0:
                report.discrepancies.append(
                    {"k": k, "kind": "proof_gap", "message": f"proof-form gap {qstr(pg)} is not positive"}
                )
    report.tail = tail_rule(k_max) if tail_rule is not None else None
    report.ledger = geometric_ledger(alpha, params.epsilon, k_max)
    report.decide()
    logger.info(f"Criterium check ({family}): {report.verdict.value}")
    return report


# ============================================================================
# Minimal orders
# ============================================================================

def minimal_orders(
    weights: WeightFamily,
    epsilon: Fraction,
    alpha: Fraction,
    r_func: RFunction,
    k_max: int,
    convention: WindowConvention = WindowConvention.RECENT,
) -> ModelParams:
    """
    Orders m_1..m_{k_max+1} chosen as the first odd integer >= A_k / gap_k**2
    (and > m_k) for k = 0..k_max.

    Raises:
        UnrepresentableError: The next order exceeds the exact bit cap
        IndeterminateComparisonError: A ceiling cannot be decided
    """
    epsilon = Fraction(epsilon)
    alpha = Fraction(alpha)
    orders: List[int] = []
    for k in range(k_max + 1):
        params = ModelParams(epsilon, weights, ExplicitOrders(orders) if orders else _EMPTY, convention)
        estimate = order_threshold(params, r_func, alpha, k)
        bits = int(estimate.log2_interval().hi) + 2
        if bits > logspace.exact_bit_cap():
            raise UnrepresentableError(
                f"minimal order m_{k + 1} needs about {bits} bits, above the exact cap",
                {"k": k, "bits": bits, "orders": [str(m) for m in orders]},
            )
        with logspace.extra_precision(bits + 192):
            threshold = order_threshold(params, r_func, alpha, k)
            m = ceil_int(threshold)
        if m % 2 == 0:
            m += 1
        if orders and m <= orders[-1]:
            m = orders[-1] + 2
        orders.append(m)
        logger.info(f"minimal order m_{k + 1}: {m if m.bit_length() <= 64 else f'{m.bit_length()} bits'}")
    return ModelParams(epsilon, weights, ExplicitOrders(orders), convention)


class _NoOrders(ExplicitOrders):
    """Placeholder before m_1 is chosen: only m_0 = 0 is defined."""

    def __init__(self):
        self.orders = ()

    def length(self) -> Optional[int]:
        return 0


_EMPTY = _NoOrders()
