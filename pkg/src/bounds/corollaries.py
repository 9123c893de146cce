"""Parameter generators and verifiers for the two explicit non-uniqueness families.

Both verifiers evaluate the order condition directly wherever the numbers are
representable, check every majorization step of the family's proof chain as a
separate comparison and close the argument for large k with a registered
inductive tail rule.
"""

from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Tuple

from src.bounds.criterium import (
    Comparison,
    CriteriumReport,
    KCheck,
    RFunction,
    TailRule,
    TailRuleResult,
    check_order_condition,
    compute_A_k,
    geometric_ledger,
    order_threshold,
    r_block_root,
    r_predecessor,
    unrepresentable,
)
from src.bounds.lemmas import weight_gap
from src.bounds.logspace import LogSpaceValue, Outcome
from src.errors import ConfigError, ParameterError, UnrepresentableError
from src.kernels.orders import DoubleExponentialOrders, TowerOrders
from src.kernels.params import ModelParams
from src.kernels.weights import Corollary1Weights, Corollary2Weights
from src.utils.logger import get_logger
from src.utils.rationals import qstr

logger = get_logger(__name__)

EPSILON = Fraction(1, 4)
ALPHA = Fraction(1, 8)

GEOMETRIC_FIRST_ORDER = 217
GEOMETRIC_PRINTED_BASE = 577
GEOMETRIC_PRINTED_THRESHOLD = Fraction(21674, 100)


class BaseStepPolicy(str, Enum):
    """How a family verifier accepts an inspected k."""

    PRINTED = "printed"  # printed k=0 threshold, displayed chains for k >= 1
    EXACT = "exact"  # direct order condition at every inspected k


def combine(outcomes: List[Outcome]) -> Outcome:
    if any(o == Outcome.NO for o in outcomes):
        return Outcome.NO
    if any(o == Outcome.INDETERMINATE for o in outcomes):
        return Outcome.INDETERMINATE
    return Outcome.YES


def _step(k: int, name: str, evaluate: Callable[[], Comparison]) -> Dict[str, Any]:
    try:
        entry = evaluate().to_dict()
    except UnrepresentableError as e:
        entry = unrepresentable(name, e)
    entry["k"] = k
    return entry


def _symbolic(name: str, holds: bool, note: str) -> Dict[str, Any]:
    return {"name": name, "outcome": (Outcome.YES if holds else Outcome.NO).value, "note": note}


def _outcome(entry: Dict[str, Any]) -> Outcome:
    return Outcome(entry["outcome"])


# ============================================================================
# Geometric family: lambda_j = (1/2)(2/3)^j, m_1 = 217, m_{j+1} = c^{m_j}
# ============================================================================

def corollary1_params(c: int) -> ModelParams:
    """
    Raises:
        ParameterError: c even or below 3
    """
    if not isinstance(c, int) or c < 3 or c % 2 == 0:
        raise ParameterError(f"tower base c must be an odd integer >= 3, got {c!r}")
    return ModelParams(EPSILON, Corollary1Weights(), TowerOrders(GEOMETRIC_FIRST_ORDER, c))


def _geometric_chain(params: ModelParams, r_func: RFunction, c: int, k: int) -> List[Dict[str, Any]]:
    m = params.orders.value(k)
    x = m * LogSpaceValue.power(2, m)
    growth = 512 * LogSpaceValue.of(Fraction(9, 2)) ** (k + 1)

    def s1() -> Comparison:
        return Comparison.evaluate(
            "S1", order_threshold(params, r_func, ALPHA, k), "<=", growth * (1 + x) ** 3,
            "A_k / gap_k^2 <= 512 (9/2)^(k+1) (1 + m_k 2^m_k)^3",
        )

    def s2() -> Comparison:
        return Comparison.evaluate(
            "S2", (1 + x) ** 3, "<=", LogSpaceValue.power(64, m), "(1 + m_k 2^m_k)^3 <= 64^m_k",
        )

    def s3() -> Comparison:
        return Comparison.evaluate(
            "S3", growth * LogSpaceValue.power(64, m), "<=", LogSpaceValue.power(c, m),
            "512 (9/2)^(k+1) 64^m_k <= c^m_k",
        )

    def s3_linear() -> Comparison:
        return _geometric_linear(c, m, k)

    def s4() -> Comparison:
        printed = LogSpaceValue.power(GEOMETRIC_PRINTED_BASE, m)
        following = params.orders.value(k + 1)
        if printed.is_exact and following.is_exact:
            return Comparison.evaluate("S4", printed, "<=", following, "577^m_k <= m_{k+1}")
        # m_{k+1} = c^m_k, so the step reduces to the bases
        return Comparison.evaluate(
            "S4", GEOMETRIC_PRINTED_BASE, "<=", c, "577^m_k <= c^m_k = m_{k+1}, compared by base"
        )

    return [
        _step(k, "S1", s1),
        _step(k, "S2", s2),
        _step(k, "S3", s3),
        _step(k, "S3'", s3_linear),
        _step(k, "S4", s4),
    ]


def _geometric_linear(c: int, m: LogSpaceValue, k: int) -> Comparison:
    """m_k log2(c/64) >= log2 512 + (k+1) log2(9/2)."""
    slope = LogSpaceValue.of(Fraction(c, 64)).log2()
    rhs = 9 + (k + 1) * LogSpaceValue.of(Fraction(9, 2)).log2()
    return Comparison.evaluate(
        "S3'", m * slope, ">=", rhs, "m_k log2(c/64) >= log2 512 + (k+1) log2(9/2)"
    )


def corollary1_tail_rule(c: int, policy: BaseStepPolicy = BaseStepPolicy.PRINTED) -> TailRule:
    """
    Induction over k > K: the log-linear step holds at the handover index and
    its left side grows by (c^m_k - m_k) log2(c/64) >= log2(9/2) per step.
    The printed constant 577 is only required under the PRINTED policy.
    """

    def rule(k_max: int) -> TailRuleResult:
        params = corollary1_params(c)
        handover = max(k_max, 1)
        conditions = [
            _symbolic("S1 for all k >= 1", True, "ln(2^(k+5)(1+x)) <= 2^(k+3)(1+x) for x >= 0"),
            _symbolic("S2 for all k >= 1", True, "m 2^m + 1 <= 4^m for m >= 1"),
            _symbolic("orders grow", c >= 3, "m_k >= k + 1 since m_1 = 217 and c^m >= m + 1"),
            _symbolic("c odd", c % 2 == 1, "orders stay odd"),
            _symbolic("c > 64", c > 64, "log2(c/64) > 0"),
        ]
        m = params.orders.value(handover)
        conditions.append(_step(handover, "S3' at handover", lambda: _geometric_linear(c, m, handover)))
        if c > 64:
            step = LogSpaceValue.of(Fraction(9, 2)).log2() / LogSpaceValue.of(Fraction(c, 64)).log2()
            conditions.append(
                _step(
                    handover,
                    "S3' increment",
                    lambda: Comparison.evaluate(
                        "S3' increment", params.orders.value(handover + 1), ">=", m + step,
                        "c^m_k - m_k >= log2(9/2) / log2(c/64), increasing in m_k",
                    ),
                )
            )
        if policy == BaseStepPolicy.PRINTED:
            conditions.append(_symbolic("printed constant", c >= GEOMETRIC_PRINTED_BASE, "577^m_k <= c^m_k"))
        outcome = combine([_outcome(e) for e in conditions])
        return TailRuleResult(
            family="corollary1",
            from_k=k_max + 1,
            outcome=outcome,
            conditions=conditions,
            description="log-linear induction on m_k log2(c/64) >= 9 + (k+1) log2(9/2)",
        )

    return rule


def corollary1_verify(
    c: int,
    k_max: int = 2,
    policy: BaseStepPolicy = BaseStepPolicy.PRINTED,
) -> CriteriumReport:
    params = corollary1_params(c)
    r_func = r_predecessor()
    report = _new_report("corollary1", params, r_func, k_max, policy, {"c": c})

    def base_step(check: KCheck) -> None:
        direct = check.threshold
        literal = Fraction(320) * Fraction(9, 4) * LogSpaceValue.of(2).ln()
        m1 = params.orders.value(1)
        printed = Comparison.evaluate("printed k=0 threshold", m1, ">=", GEOMETRIC_PRINTED_THRESHOLD)
        report.chain_steps.append({**printed.to_dict(), "k": 0})
        report.discrepancies.append(
            {
                "k": 0,
                "kind": "printed_threshold",
                "direct_threshold": direct.approx() if direct is not None else None,
                "printed_threshold": "216.74",
                "printed_expression": "320 (3/2)^2 ln 2",
                "printed_expression_value": literal.approx(),
                "message": "printed k=0 threshold disagrees with A_0 / gap_0^2 and with its own expression",
            }
        )
        if policy == BaseStepPolicy.PRINTED:
            check.satisfied = printed.outcome
            check.accepted_by = "printed_threshold"

    def chain(k: int) -> List[Dict[str, Any]]:
        return _geometric_chain(params, r_func, c, k)

    _inspect(report, params, r_func, k_max, policy, base_step, chain)
    report.tail = corollary1_tail_rule(c, policy)(report.k_max)
    report.ledger = geometric_ledger(ALPHA, EPSILON, report.k_max)
    report.decide()
    logger.info(f"Geometric family c={c} ({policy.value}): {report.verdict.value}")
    return report


# ============================================================================
# Block family: block weights, m_j = 2^{c j^2} - 1, r(k) = floor(sqrt(log2 k) / c)
# ============================================================================

def corollary2_params(c: int) -> ModelParams:
    """
    Raises:
        ParameterError: c < 1
    """
    if not isinstance(c, int) or c < 1:
        raise ParameterError(f"block constant c must be an integer >= 1, got {c!r}")
    return ModelParams(EPSILON, Corollary2Weights(c), DoubleExponentialOrders(c))


def block_majorant(k: int, epsilon: Fraction = EPSILON) -> LogSpaceValue:
    """B_k = 4 (k+1) 2^(2 (k+1) log2(1 / (2 eps))), i.e. 4 (k+1) 4^(k+1) at eps = 1/4."""
    squared = (1 / (2 * Fraction(epsilon))) ** 2
    return 4 * (k + 1) * LogSpaceValue.power(squared, LogSpaceValue.of(k + 1))


def _pow2(exponent: int) -> LogSpaceValue:
    return LogSpaceValue.power(2, LogSpaceValue.of(exponent))


def _block_gap_bound(params: ModelParams, r_func: RFunction, k: int) -> Comparison:
    """gap_k >= (1/8)(3/4)^(l-2), l the block holding index k+1."""
    l = params.weights.block_of(k + 1)
    return Comparison.evaluate(
        "gap bound", weight_gap(params, r_func(k + 1), k), ">=", Fraction(1, 8) * Corollary2Weights.s ** (l - 2),
        f"gap_k >= (1/8)(3/4)^(l-2) with l = {l}",
    )


def _block_chain(params: ModelParams, r_func: RFunction, c: int, k: int) -> Tuple[List[Dict[str, Any]], Dict[str, Any]]:
    B = block_majorant(k)
    printed = 81 * _pow2(c * (k * k + 2 * k))
    composed = 81 * _pow2(c * (k * k + 3 * k))
    following = params.orders.value(k + 1)

    steps = [
        _step(k, "i", lambda: Comparison.evaluate(
            "i", compute_A_k(params, r_func, ALPHA, k), "<=", 81 * B * _pow2(c * k * k),
            "A_k <= 81 B_k 2^(c k^2)",
        )),
        _step(k, "ii", lambda: Comparison.evaluate("ii", B, "<=", _pow2(c * k), "B_k <= 2^(c k)")),
        _step(k, "iii", lambda: Comparison.evaluate(
            "iii", weight_gap(params, r_func(k + 1), k), ">=", Fraction(1, 2 ** (c * k)), "gap_k >= 2^(-c k)",
        )),
        _step(k, "gap bound", lambda: _block_gap_bound(params, r_func, k)),
        _step(k, "iv", lambda: Comparison.evaluate(
            "iv", _pow2(c * (k + 1) ** 2), ">=", printed, "2^(c (k+1)^2) >= 81 2^(c (k^2 + 2k))",
        )),
        _step(k, "order realization", lambda: Comparison.evaluate(
            "order realization", following, ">=", printed, "m_{k+1} = 2^(c (k+1)^2) - 1 >= 81 2^(c (k^2 + 2k))",
        )),
        _step(k, "composed", lambda: Comparison.evaluate(
            "composed", following, ">=", composed, "m_{k+1} >= 81 2^(c (k^2 + 3k)), what i-iii imply",
        )),
    ]
    audit = {
        "k": k,
        "kind": "composition",
        "implied_majorant": composed.approx(),
        "printed_majorant": printed.approx(),
        "message": "steps i-iii give A_k / gap_k^2 <= 81 2^(c (k^2 + 3k)), not 81 2^(c (k^2 + 2k))",
    }
    return steps, audit


def corollary2_tail_rule(c: int, policy: BaseStepPolicy = BaseStepPolicy.PRINTED) -> TailRule:
    """
    For k > K each displayed step holds once it holds at K+1: the B_k margin
    (c-2)k - 4 - log2(k+1) increases for c >= 3, and the final step reduces to 2^c >= 81.
    Under EXACT the composed majorant is required, which no c satisfies for k >= 1.
    """

    def rule(k_max: int) -> TailRuleResult:
        first = k_max + 1
        ln2 = LogSpaceValue.of(2).ln()
        conditions = [
            _symbolic("gap bound", c >= 2, "(1/8)(3/4)^(l-2) >= (1/2)^(l+1) >= 2^(-c k) for c >= 2"),
            _symbolic("B_k margin increasing", c >= 3, "(c-2) - 1/((k+1) ln 2) > 0 for c >= 3, k >= 1"),
            _step(first, "ii at handover", lambda: Comparison.evaluate(
                "ii at handover", block_majorant(first), "<=", _pow2(c * first), "B_k <= 2^(c k)",
            )),
            _step(first, "i numeric at handover", lambda: Comparison.evaluate(
                "i numeric at handover",
                ln2 * (128 * (first + 2) + 32 * (c * first * first + 1)),
                "<=",
                49 * _pow2(c * first * first),
                "128 ln2 (k+2) + 32 ln2 (c k^2 + 1) <= 49 2^(c k^2)",
            )),
            _symbolic("final step", 2 ** c >= 81, "2^(c (k+1)^2) >= 81 2^(c (k^2+2k)) iff 2^c >= 81"),
            _symbolic("order realization", 2 ** c > 81, "2^(c (k+1)^2) - 1 >= 81 2^(c (k^2+2k)) iff 2^c > 81"),
        ]
        if policy == BaseStepPolicy.EXACT:
            conditions.append(
                _step(first, "composed at handover", lambda: Comparison.evaluate(
                    "composed at handover",
                    DoubleExponentialOrders(c).value(first + 1),
                    ">=",
                    81 * _pow2(c * (first * first + 3 * first)),
                    "2^(c (1-k)) >= 81 fails for every k >= 1",
                ))
            )
        return TailRuleResult(
            family="corollary2",
            from_k=first,
            outcome=combine([_outcome(e) for e in conditions]),
            conditions=conditions,
            description="displayed majorizations, each monotone in k beyond the handover",
        )

    return rule


def corollary2_verify(
    c: int,
    k_max: int = 3,
    policy: BaseStepPolicy = BaseStepPolicy.PRINTED,
) -> CriteriumReport:
    params = corollary2_params(c)
    r_func = r_block_root(c)
    report = _new_report("corollary2", params, r_func, k_max, policy, {"c": c})

    def base_step(check: KCheck) -> None:
        final = Comparison.evaluate("iv at k=0", _pow2(c), ">=", 81, "2^c >= 81")
        report.chain_steps.append({**final.to_dict(), "k": 0})
        report.discrepancies.append(
            {
                "k": 0,
                "kind": "base_step",
                "direct_threshold": check.threshold.approx() if check.threshold is not None else None,
                "m_1": params.orders.value(1).approx(),
                "direct": check.direct.value,
                "message": "the displayed chain covers k=0 through 2^c >= 81; the direct threshold is reported alongside",
            }
        )
        if policy == BaseStepPolicy.PRINTED:
            check.satisfied = final.outcome
            check.accepted_by = "printed_final_step"

    def chain(k: int) -> List[Dict[str, Any]]:
        steps, audit = _block_chain(params, r_func, c, k)
        report.discrepancies.append(audit)
        return steps

    _inspect(report, params, r_func, k_max, policy, base_step, chain, informational={"composed"})
    report.tail = corollary2_tail_rule(c, policy)(report.k_max)
    report.ledger = geometric_ledger(ALPHA, EPSILON, report.k_max)
    report.decide()
    logger.info(f"Block family c={c} ({policy.value}): {report.verdict.value}")
    return report


# ============================================================================
# Shared inspection loop and registry
# ============================================================================

def _new_report(
    family: str,
    params: ModelParams,
    r_func: RFunction,
    k_max: int,
    policy: BaseStepPolicy,
    extra: Dict[str, Any],
) -> CriteriumReport:
    if k_max < 0:
        raise ParameterError(f"k_max must be >= 0, got {k_max}")
    return CriteriumReport(
        family=family,
        epsilon=EPSILON,
        alpha=ALPHA,
        k_max=k_max,
        policy=policy.value,
        params={**params.describe(), "r": r_func.describe(), **extra},
    )


def _inspect(
    report: CriteriumReport,
    params: ModelParams,
    r_func: RFunction,
    k_max: int,
    policy: BaseStepPolicy,
    base_step: Callable[[KCheck], None],
    chain: Callable[[int], List[Dict[str, Any]]],
    informational: Optional[set] = None,
) -> None:
    """
    Inspect k = 0..k_max. Inspection stops before the first k whose direct
    threshold is unrepresentable; the tail rule then starts right after the
    last inspected k.
    """
    informational = informational or set()
    for k in range(k_max + 1):
        check = check_order_condition(params, r_func, ALPHA, k)
        if k >= 1 and check.threshold is None:
            report.k_max = k - 1
            report.notes.append(
                f"direct threshold at k={k} is unrepresentable; inspection stops at k={k - 1}"
            )
            logger.warning(report.notes[-1])
            break
        if check.proof_gap is not None and check.proof_gap <= 0:
            report.discrepancies.append(
                {"k": k, "kind": "proof_gap", "message": f"proof-form gap {qstr(check.proof_gap)} is not positive"}
            )
        if k == 0:
            base_step(check)
        else:
            steps = chain(k)
            report.chain_steps.extend(steps)
            if policy == BaseStepPolicy.PRINTED:
                check.satisfied = combine([_outcome(s) for s in steps if s["name"] not in informational])
                check.accepted_by = "proof_chain"
        report.per_k.append(check)


TailRuleFactory = Callable[[int, BaseStepPolicy], TailRule]

TAIL_RULES: Dict[str, TailRuleFactory] = {
    "corollary1": corollary1_tail_rule,
    "corollary2": corollary2_tail_rule,
}

FAMILY_VERIFIERS: Dict[str, Callable[..., CriteriumReport]] = {
    "corollary1": corollary1_verify,
    "corollary2": corollary2_verify,
}

FAMILY_PARAMS: Dict[str, Callable[[int], ModelParams]] = {
    "corollary1": corollary1_params,
    "corollary2": corollary2_params,
}


def tail_rule_for(family: str, c: int, policy: BaseStepPolicy = BaseStepPolicy.PRINTED) -> Optional[TailRule]:
    """Registered tail rule of a family, None for families without one."""
    factory = TAIL_RULES.get(family)
    return factory(c, policy) if factory is not None else None


def verify_family(
    family: str,
    c: int,
    k_max: Optional[int] = None,
    policy: BaseStepPolicy = BaseStepPolicy.PRINTED,
) -> CriteriumReport:
    """
    Raises:
        ConfigError: Unknown family
    """
    verifier = FAMILY_VERIFIERS.get(family)
    if verifier is None:
        raise ConfigError(f"Unknown family: {family!r}", {"supported": sorted(FAMILY_VERIFIERS)})
    if k_max is None:
        return verifier(c, policy=policy)
    return verifier(c, k_max=k_max, policy=policy)
