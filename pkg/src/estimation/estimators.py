"""Monte-Carlo estimators over perfect samples, reduced in replicate order."""

import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.bounds.lemmas import concentration_rhs, eta_mean_bound, expected_eta, magnetization_lower_bound
from src.cftp.engine import (
    NotCoalesced,
    coalescence_time,
    coupled_perfect_sample,
    forward_simulate,
    kernel_regeneration_time,
    perfect_sample,
    regeneration_time,
    require_monotone,
    simulation_rule,
)
from src.errors import (
    CouplingInvariantError,
    HorizonOverflowError,
    ParameterError,
    PreconditionError,
    ScanOverflowError,
    StateSpaceCapError,
)
from src.estimation.hoeffding import hoeffding_band, hoeffding_halfwidth, standard_error
from src.exact.coupling import last_symbol_gap, pair_forward
from src.exact.transfer import PAIR_KEYS, marginal_plus, pair_marginals, stationary
from src.kernels.base_kernel import BaseKernel
from src.kernels.bk_kernels import TruncatedKernel, Variant, mixed
from src.kernels.params import ModelParams
from src.kernels.symbols import mask
from src.kernels.table_kernel import dominates
from src.utils.config_loader import default_settings
from src.utils.logger import get_logger
from src.utils.rationals import qstr
from src.workers import ReplicatePool, StreamFactory, kernel_from_key, kernel_key, stream_factory

logger = get_logger(__name__)

RECOVERABLE = (ScanOverflowError, HorizonOverflowError)

PHASE_EXACT_ORDER_CAP = 8
PHASE_EXACT_HORIZON_CAP = 4096
DOMINATION_ORDER_CAP = 16


# ============================================================================
# Reports
# ============================================================================

@dataclass
class EstimateReport:
    """
    Point estimate with its Hoeffding band.

    Bounded outcomes carry a band; unbounded ones (times) carry a standard error.
    """

    quantity: str
    estimate: float
    replications: int
    successes: int
    failures: int
    confidence: float
    seed: int
    stream: Dict[str, Any]
    halfwidth: Optional[float] = None
    band: Optional[Tuple[float, float]] = None
    standard_error: Optional[float] = None
    extra: Dict[str, Any] = field(default_factory=dict)
    wall_clock: float = 0.0

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        data = {
            "quantity": self.quantity,
            "estimate": self.estimate,
            "replications": self.replications,
            "successes": self.successes,
            "failures": self.failures,
            "confidence": self.confidence,
            "halfwidth": self.halfwidth,
            "band": list(self.band) if self.band is not None else None,
            "standard_error": self.standard_error,
            "seed": self.seed,
            "stream": self.stream,
            "extra": self.extra,
        }
        if include_timing:
            data["wall_clock"] = self.wall_clock
        return data

    def to_row(self) -> Dict[str, Any]:
        """Flat CSV row."""
        lo, hi = self.band if self.band is not None else (None, None)
        return {
            "quantity": self.quantity,
            "estimate": self.estimate,
            "band_lower": lo,
            "band_upper": hi,
            "replications": self.replications,
            "failures": self.failures,
            "confidence": self.confidence,
            "seed": self.seed,
            "purpose": self.stream.get("purpose"),
        }


@dataclass(frozen=True)
class Job:
    """Everything a replicate needs, in picklable form."""

    kernels: Tuple[str, ...]
    streams: StreamFactory
    horizon_cap: int
    scan_cap: int
    options: Dict[str, Any] = field(default_factory=dict, hash=False)

    def kernel(self, i: int = 0):
        return kernel_from_key(self.kernels[i])


@dataclass
class ReplicateOutcome:
    values: Tuple[Any, ...] = ()
    failure: Optional[str] = None


def _job(kernels: Sequence[BaseKernel], purpose: str, seed: int, **options: Any) -> Job:
    settings = default_settings().cftp
    return Job(
        kernels=tuple(kernel_key(k) for k in kernels),
        streams=stream_factory(seed, purpose),
        horizon_cap=options.pop("horizon_cap", None) or settings.horizon_cap,
        scan_cap=options.pop("scan_cap", None) or settings.scan_cap,
        options=options,
    )


def _run(job: Job, replicate_fn, n: int, workers: Optional[int]) -> Tuple[List[Tuple[Any, ...]], int, Dict[str, int], float]:
    if n < 1:
        raise ParameterError(f"need at least one replication, got {n}")
    started = time.perf_counter()
    outcomes = ReplicatePool(workers).map(partial(replicate_fn, job), n)
    elapsed = time.perf_counter() - started
    values = [o.values for o in outcomes if o.failure is None]
    kinds: Dict[str, int] = {}
    for o in outcomes:
        if o.failure is not None:
            kinds[o.failure] = kinds.get(o.failure, 0) + 1
    failures = n - len(values)
    if failures:
        logger.warning(f"{failures} of {n} replications failed: {kinds}")
    if not values:
        raise ScanOverflowError("every replication failed", {"failures": kinds})
    return values, failures, kinds, elapsed


def _probability(
    quantity: str,
    outcomes: Sequence[int],
    n: int,
    failures: int,
    job: Job,
    confidence: float,
    elapsed: float,
    extra: Optional[Dict[str, Any]] = None,
) -> EstimateReport:
    successes = len(outcomes)
    estimate = float(np.mean(outcomes))
    return EstimateReport(
        quantity=quantity,
        estimate=estimate,
        replications=n,
        successes=successes,
        failures=failures,
        confidence=confidence,
        seed=job.streams.seed,
        stream=job.streams.describe(),
        halfwidth=hoeffding_halfwidth(successes, confidence),
        band=hoeffding_band(estimate, successes, confidence),
        extra=extra or {},
        wall_clock=elapsed,
    )


def _mean(
    quantity: str,
    values: Sequence[float],
    n: int,
    failures: int,
    job: Job,
    confidence: float,
    elapsed: float,
    extra: Optional[Dict[str, Any]] = None,
) -> EstimateReport:
    return EstimateReport(
        quantity=quantity,
        estimate=float(np.mean(values)),
        replications=n,
        successes=len(values),
        failures=failures,
        confidence=confidence,
        seed=job.streams.seed,
        stream=job.streams.describe(),
        standard_error=standard_error(values),
        extra=extra or {},
        wall_clock=elapsed,
    )


def _confidence(confidence: Optional[float]) -> float:
    return default_settings().estimation.confidence if confidence is None else confidence


# ============================================================================
# d-bar upper bound
# ============================================================================

def _d2_pair(a: BaseKernel, b: BaseKernel) -> Optional[Tuple[ModelParams, int]]:
    """(params, k) when the pair is (lower(k), lower(k+1)) of one model."""
    if not (isinstance(a, TruncatedKernel) and isinstance(b, TruncatedKernel)):
        return None
    if a.variant != Variant.LOWER or b.variant != Variant.LOWER or a.params.describe() != b.params.describe():
        return None
    if b.k != a.k + 1:
        return None
    return a.params, a.k


def _dbar_replicate(job: Job, i: int) -> ReplicateOutcome:
    stream = job.streams(i)
    a, b = job.kernel(0), job.kernel(1)
    try:
        sample = coupled_perfect_sample([a, b], (0, 0), stream, job.horizon_cap)
        xa, xb = sample.blocks[0][0], sample.blocks[1][0]
        values: Tuple[Any, ...] = (int(xa != xb), int(xa < xb), int(xa > xb))
        if job.options.get("d2"):
            m_k, m_next = job.options["eta_order"], job.options["block"]
            eta = 0 if m_k == 0 else regeneration_time(m_k, job.options["epsilon"], stream, job.scan_cap)
            block = perfect_sample(b, (-m_next, -1), stream, horizon_cap=job.horizon_cap, with_regeneration=False)
            values += (eta, int(sum(block.sample) < 0))
    except RECOVERABLE as e:
        return ReplicateOutcome(failure=e.kind)
    return ReplicateOutcome(values)


def estimate_dbar_upper(
    kernel_a: BaseKernel,
    kernel_b: BaseKernel,
    n: int,
    seed: int,
    confidence: Optional[float] = None,
    workers: Optional[int] = None,
    horizon_cap: Optional[int] = None,
    scan_cap: Optional[int] = None,
) -> EstimateReport:
    """
    Fraction of coupled perfect samples (one shared stream per replicate)
    that disagree at time 0; an upper bound on d-bar in expectation.

    For a (lower(k), lower(k+1)) pair the report also carries the Wald
    majorant (mean eta_k + 1) * P(S_0^c), S_0 = {sum of X^{k+1} over
    [-m_{k+1}, -1] > 0}.

    Raises:
        PreconditionError: A kernel that is not finite-order attractive
    """
    for kernel in (kernel_a, kernel_b):
        require_monotone(kernel)
    confidence = _confidence(confidence)
    pair = _d2_pair(kernel_a, kernel_b)
    options: Dict[str, Any] = {"horizon_cap": horizon_cap, "scan_cap": scan_cap}
    if pair is not None:
        params, k = pair
        options.update(
            d2=True,
            eta_order=params.order(k) if k > 0 else 0,
            block=params.order(k + 1),
            epsilon=qstr(params.epsilon),
        )
    job = _job([kernel_a, kernel_b], "dbar", seed, **options)
    logger.info(f"Estimating d-bar upper bound for {kernel_a.label} vs {kernel_b.label} ({n} replications)")
    values, failures, kinds, elapsed = _run(job, _dbar_replicate, n, workers)

    above = sum(v[2] for v in values)
    below = sum(v[1] for v in values)
    ordered = None
    if max(kernel_a.order, kernel_b.order) <= DOMINATION_ORDER_CAP:
        if dominates(kernel_a, kernel_b):
            ordered = below
        elif dominates(kernel_b, kernel_a):
            ordered = above
    extra: Dict[str, Any] = {
        "kernels": [kernel_a.label, kernel_b.label],
        "failure_kinds": kinds,
        "order_violations": ordered,
    }
    if ordered:
        logger.warning(f"{ordered} replications broke the pointwise order of the coupled samples")

    if pair is not None:
        params, k = pair
        etas = [v[3] for v in values]
        misses = [v[4] for v in values]
        mean_eta = float(np.mean(etas))
        p_miss = float(np.mean(misses))
        h = hoeffding_halfwidth(len(values), confidence)
        extra["wald_majorant"] = {
            "k": k,
            "mean_eta": mean_eta,
            "eta_standard_error": standard_error(etas),
            "p_s0_complement": p_miss,
            "p_s0_complement_band": list(hoeffding_band(p_miss, len(values), confidence)),
            "majorant": (mean_eta + 1) * p_miss,
            "majorant_upper": (mean_eta + 1) * min(1.0, p_miss + h),
            "analytic_eta_bound": eta_mean_bound(job.options["eta_order"], params.epsilon).approx(),
        }
    return _probability(
        "dbar_upper",
        [v[0] for v in values],
        n,
        failures,
        job,
        confidence,
        elapsed,
        extra,
    )


# ============================================================================
# Marginals
# ============================================================================

def _marginal_replicate(job: Job, i: int) -> ReplicateOutcome:
    stream = job.streams(i)
    try:
        result = perfect_sample(job.kernel(), (-1, 0), stream, horizon_cap=job.horizon_cap, with_regeneration=False)
    except RECOVERABLE as e:
        return ReplicateOutcome(failure=e.kind)
    previous, current = result.sample
    pair = ("+" if previous == 1 else "-") + ("+" if current == 1 else "-")
    return ReplicateOutcome((int(current == 1), pair))


def estimate_marginal(
    kernel: BaseKernel,
    n: int,
    seed: int,
    confidence: Optional[float] = None,
    workers: Optional[int] = None,
    horizon_cap: Optional[int] = None,
) -> EstimateReport:
    """
    Frequency of x_0 = +1 over n perfect samples of (x_{-1}, x_0), with the
    frequencies of the four pairs in extra["pairs"].
    """
    require_monotone(kernel)
    confidence = _confidence(confidence)
    job = _job([kernel], "marginal", seed, horizon_cap=horizon_cap)
    values, failures, kinds, elapsed = _run(job, _marginal_replicate, n, workers)
    report = _probability(
        "marginal_plus", [v[0] for v in values], n, failures, job, confidence, elapsed,
        {"kernel": kernel.label, "failure_kinds": kinds},
    )
    report.extra["magnetization"] = 2 * report.estimate - 1
    successes = len(values)
    pairs = {}
    for key in PAIR_KEYS:
        p = float(np.mean([v[1] == key for v in values]))
        pairs[key] = {"estimate": p, "band": list(hoeffding_band(p, successes, confidence))}
    report.extra["pairs"] = pairs
    return report


# ============================================================================
# Regeneration and coalescence times
# ============================================================================

@dataclass
class EtaThetaReport:
    eta: EstimateReport
    theta: EstimateReport
    tail: List[Dict[str, Any]]
    order: int
    eta_bound: Optional[str]
    exact_eta_mean: Optional[str]
    eta_bound_value: Optional[float] = None

    @property
    def eta_within_bound(self) -> Optional[bool]:
        """Empirical mean eta at most m / (2 eps)**m."""
        if self.eta_bound_value is None:
            return None
        return self.eta.estimate <= self.eta_bound_value

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        return {
            "eta": self.eta.to_dict(include_timing),
            "theta": self.theta.to_dict(include_timing),
            "theta_tail": self.tail,
            "order": self.order,
            "eta_mean_bound": self.eta_bound,
            "eta_within_bound": self.eta_within_bound,
            "exact_eta_mean": self.exact_eta_mean,
        }


def _eta_theta_replicate(job: Job, i: int) -> ReplicateOutcome:
    stream = job.streams(i)
    kernel = job.kernel()
    m = job.options.get("m")
    try:
        theta = coalescence_time(kernel, stream, job.horizon_cap)
        if isinstance(theta, NotCoalesced):
            return ReplicateOutcome(failure=HorizonOverflowError.kind)
        if m is None:
            eta = kernel_regeneration_time(kernel, stream, job.scan_cap)
        else:
            eta = regeneration_time(m, job.options["epsilon"], stream, job.scan_cap)
    except RECOVERABLE as e:
        return ReplicateOutcome(failure=e.kind)
    if m is None and theta > eta:
        raise CouplingInvariantError(
            f"coalescence time {theta} exceeds regeneration time {eta}",
            {"replicate": i, "theta": theta, "eta": eta},
        )
    return ReplicateOutcome((eta, theta))


def estimate_eta_theta(
    kernel: BaseKernel,
    n: int,
    seed: int,
    m: Optional[int] = None,
    epsilon: Optional[Fraction] = None,
    tail_max: Optional[int] = None,
    confidence: Optional[float] = None,
    workers: Optional[int] = None,
    horizon_cap: Optional[int] = None,
    scan_cap: Optional[int] = None,
) -> EtaThetaReport:
    """
    Empirical regeneration time eta and coalescence time theta at time 0,
    with the tail table P(theta > j), j = 0..tail_max.

    Without m, eta is the regeneration time of the kernel's own base cells and
    theta <= eta is asserted in every replicate.

    Raises:
        PreconditionError: No base cells and no explicit order
        CouplingInvariantError: theta > eta in some replicate
    """
    require_monotone(kernel)
    confidence = _confidence(confidence)
    tail_max = default_settings().estimation.tail_max if tail_max is None else tail_max
    if epsilon is None and isinstance(kernel, TruncatedKernel):
        epsilon = kernel.params.epsilon
    rule = simulation_rule(kernel)
    if m is None:
        if rule.order > 0 and rule.base_threshold() is None:
            raise PreconditionError(
                "kernel has no base cells; pass a regeneration order and epsilon",
                {"kernel": kernel.label},
            )
        order = rule.order
    else:
        if epsilon is None:
            raise ParameterError("an explicit regeneration order needs epsilon")
        order = m
    options: Dict[str, Any] = {"m": m, "horizon_cap": horizon_cap, "scan_cap": scan_cap}
    if epsilon is not None:
        options["epsilon"] = qstr(Fraction(epsilon))
    job = _job([kernel], "eta_theta", seed, **options)
    values, failures, kinds, elapsed = _run(job, _eta_theta_replicate, n, workers)

    etas = [v[0] for v in values]
    thetas = np.array([v[1] for v in values])
    successes = len(values)
    halfwidth = hoeffding_halfwidth(successes, confidence)
    tail = []
    for j in range(tail_max + 1):
        p = float(np.mean(thetas > j))
        tail.append({"j": j, "p_theta_exceeds": p, "band": list(hoeffding_band(p, successes, confidence))})

    bound = eta_mean_bound(order, epsilon) if epsilon is not None else None
    exact_mean = None
    if order == 0:
        exact_mean = "0"
    elif epsilon is not None:
        exact_mean = qstr(expected_eta(order, epsilon))
    extra = {"kernel": kernel.label, "order": order, "failure_kinds": kinds, "tail_halfwidth": halfwidth}
    return EtaThetaReport(
        eta=_mean("eta", etas, n, failures, job, confidence, elapsed, dict(extra)),
        theta=_mean("theta", thetas.tolist(), n, failures, job, confidence, elapsed, dict(extra)),
        tail=tail,
        order=order,
        eta_bound=bound.approx() if bound is not None else None,
        exact_eta_mean=exact_mean,
        eta_bound_value=float(bound.value_interval().hi) if bound is not None else None,
    )


# ============================================================================
# Concentration
# ============================================================================

def _deviation_replicate(job: Job, i: int) -> ReplicateOutcome:
    stream = job.streams(i)
    block = job.options["block"]
    try:
        result = perfect_sample(job.kernel(), (1, block), stream, horizon_cap=job.horizon_cap, with_regeneration=False)
    except RECOVERABLE as e:
        return ReplicateOutcome(failure=e.kind)
    E = Fraction(job.options["magnetization"])
    deviation = abs(Fraction(sum(result.sample), block) - E)
    return ReplicateOutcome((int(deviation >= E / 2),))


def stationary_magnetization(kernel: BaseKernel) -> Optional[Fraction]:
    """Exact E[Y_0] = 2 mu(x_0 = 1) - 1, or None when the state space is too large."""
    try:
        dist = stationary(kernel)
    except StateSpaceCapError:
        return None
    plus = marginal_plus(dist)
    return 2 * plus - 1 if dist.exact else 2 * Fraction(float(plus)).limit_denominator(10**12) - 1


def stationary_pairs(kernel: BaseKernel) -> Optional[Dict[str, float]]:
    """Exact mu(x_{-1}, x_0) as floats, or None when the state space is too large."""
    try:
        dist = stationary(kernel, order=max(kernel.order, 2))
    except StateSpaceCapError:
        return None
    return {key: float(p) for key, p in pair_marginals(dist).items()}


def concentration_empirical(
    params: ModelParams,
    r: int,
    k: int,
    n: int,
    seed: int,
    confidence: Optional[float] = None,
    workers: Optional[int] = None,
    horizon_cap: Optional[int] = None,
) -> EstimateReport:
    """
    Frequency of |mean of Y over a block of m_{k+1} sites - E[Y]| >= E[Y] / 2
    for the stationary mixed(r, k+1) chain, next to the closed-form bound.

    E[Y] is exact when the chain is small enough, else the magnetization lower bound.

    Raises:
        HypothesisError: Weight gap not positive
    """
    confidence = _confidence(confidence)
    lower_bound = magnetization_lower_bound(params, r, k)
    kernel = mixed(params, r, k + 1)
    exact = stationary_magnetization(kernel)
    E = exact if exact is not None else lower_bound
    if E <= 0:
        raise PreconditionError("concentration check needs a positive magnetization", {"E": qstr(E)})
    block = params.order(k + 1)
    job = _job([kernel], "concentration", seed, horizon_cap=horizon_cap, block=block, magnetization=qstr(E))
    values, failures, kinds, elapsed = _run(job, _deviation_replicate, n, workers)
    rhs = concentration_rhs(params, r, k, magnetization=E)
    return _probability(
        "concentration_deviation",
        [v[0] for v in values],
        n,
        failures,
        job,
        confidence,
        elapsed,
        {
            "kernel": kernel.label,
            "r": r,
            "k": k,
            "block": block,
            "magnetization": qstr(E),
            "magnetization_source": "exact" if exact is not None else "lower_bound",
            "magnetization_lower_bound": qstr(lower_bound),
            "concentration_rhs": rhs.approx(),
            "concentration_rhs_value": float(rhs.value_interval().hi),
            "failure_kinds": kinds,
        },
    )


# ============================================================================
# Phase gap
# ============================================================================

def _phase_replicate(job: Job, i: int) -> ReplicateOutcome:
    stream = job.streams(i)
    kernel = job.kernel()
    horizon = job.options["horizon"]
    plus = forward_simulate(kernel, 1, 1 - horizon, 0, stream)[-1]
    minus = forward_simulate(kernel, -1, 1 - horizon, 0, stream)[-1]
    if plus < minus:
        raise CouplingInvariantError(
            "trajectory from the +1 past fell below the trajectory from the -1 past",
            {"replicate": i},
        )
    return ReplicateOutcome((int(plus != minus), int(plus == 1), int(minus == 1)))


def exact_phase_gap(kernel: BaseKernel, horizon: int) -> Fraction:
    """P(x_0 = 1 | +1 past) - P(x_0 = 1 | -1 past) after ``horizon`` shared-uniform steps."""
    rule = simulation_rule(kernel)
    order = max(rule.order, 1)
    law = pair_forward(rule, mask(order), rule, 0, horizon, order)
    return last_symbol_gap(law)


def estimate_phase_gap_kernel(
    kernel: BaseKernel,
    horizon: int,
    n: int,
    seed: int,
    confidence: Optional[float] = None,
    workers: Optional[int] = None,
) -> EstimateReport:
    """
    Gap between the +1-past and -1-past forward chains at time 0 after
    ``horizon`` steps driven by shared uniforms.

    Raises:
        PreconditionError: Non-monotone kernel
    """
    if horizon < 1:
        raise ParameterError(f"horizon must be >= 1, got {horizon}")
    require_monotone(kernel)
    confidence = _confidence(confidence)
    job = _job([kernel], "phase", seed, horizon=horizon)
    values, failures, kinds, elapsed = _run(job, _phase_replicate, n, workers)
    extra: Dict[str, Any] = {
        "kernel": kernel.label,
        "horizon": horizon,
        "plus_past_frequency": float(np.mean([v[1] for v in values])),
        "minus_past_frequency": float(np.mean([v[2] for v in values])),
        "scope": "truncation",
        "note": "measures the finite-order truncation, not the full model",
    }
    rule_order = simulation_rule(kernel).order
    if rule_order <= PHASE_EXACT_ORDER_CAP and horizon <= PHASE_EXACT_HORIZON_CAP:
        gap = exact_phase_gap(kernel, horizon)
        extra["exact_gap"] = qstr(gap)
        extra["exact_gap_float"] = float(gap)
    return _probability("phase_gap", [v[0] for v in values], n, failures, job, confidence, elapsed, extra)


def highest_truncation(params: ModelParams, order_cap: int) -> int:
    """
    Largest k with m_k <= order_cap.

    Raises:
        ParameterError: order_cap below m_1
    """
    first = params.orders.exact_or_none(1)
    if first is None or order_cap < first:
        raise ParameterError(f"order cap {order_cap} is below m_1", {"m_1": first})
    k = 1
    while True:
        following = params.orders.exact_or_none(k + 1)
        if following is None or following > order_cap:
            return k
        k += 1


def estimate_phase_gap(
    params: ModelParams,
    order_cap: int,
    horizon: int,
    n: int,
    seed: int,
    variant: Union[Variant, str] = Variant.LOWER,
    confidence: Optional[float] = None,
    workers: Optional[int] = None,
) -> EstimateReport:
    """estimate_phase_gap_kernel on the highest lower (or upper) truncation with m_k <= order_cap."""
    variant = Variant(variant)
    if variant not in (Variant.LOWER, Variant.UPPER):
        raise ParameterError(f"phase gap runs on lower or upper truncations, got {variant.value}")
    k = highest_truncation(params, order_cap)
    kernel = TruncatedKernel(params, variant, k)
    logger.info(f"Phase gap on {kernel.label} (order {kernel.order}), horizon {horizon}")
    report = estimate_phase_gap_kernel(kernel, horizon, n, seed, confidence, workers)
    report.extra["truncation_index"] = k
    return report
