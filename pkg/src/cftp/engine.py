"""Forward simulation, monotone coupling from the past and regeneration scans.

Time runs over the integers; the symbol at time t is produced from the
uniform U_t of the stream and the context (x_{t-1}, x_{t-2}, ...). A run
"from start s" begins with the given past placed right before s.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.cftp.random_stream import RandomnessStream
from src.errors import (
    ContextTooShortError,
    CouplingInvariantError,
    HorizonOverflowError,
    ParameterError,
    PreconditionError,
    ScanOverflowError,
)
from src.kernels.base_kernel import BaseKernel
from src.kernels.bk_kernels import FullBK
from src.kernels.partition import UpdateRule
from src.kernels.symbols import Context, SpinSymbol, mask, push
from src.kernels.table_kernel import TableKernel, check_attractive
from src.utils.config_loader import default_settings
from src.utils.logger import get_logger
from src.utils.rationals import dyadic_threshold, to_q

logger = get_logger(__name__)

Past = Union[Context, int]
Window = Tuple[int, int]

SCAN_CHUNK = 1 << 16


class Method(str, Enum):
    MONOTONE_SANDWICH = "monotone_sandwich"
    REGENERATION_WINDOW = "regeneration_window"


@dataclass(frozen=True)
class NotCoalesced:
    """No coalescence within the horizon; the caller may extend it."""

    horizon: int


@dataclass
class CftpResult:
    """
    Perfect sample over a window of times.

    Attributes:
        window: (a, b), inclusive
        sample: Symbols x_a..x_b
        coalescence_time: Smallest backward horizon (measured from a) at which
            the extremal chains agree on the whole window
        regeneration_time: Regeneration time measured from a, when computed
        method: Sampling method used
        stream: Stream identity (seed, replicate, purpose)
    """

    window: Window
    sample: Tuple[int, ...]
    coalescence_time: Optional[int]
    regeneration_time: Optional[int]
    method: Method
    stream: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "window": list(self.window),
            "sample": list(self.sample),
            "coalescence_time": self.coalescence_time,
            "regeneration_time": self.regeneration_time,
            "method": self.method.value,
            "stream": self.stream,
        }


# ============================================================================
# Helpers
# ============================================================================

def simulation_rule(kernel: Union[BaseKernel, FullBK, UpdateRule]) -> UpdateRule:
    """
    Update rule of a finite-order kernel.

    Raises:
        PreconditionError: The full (infinite-order) model
    """
    if isinstance(kernel, UpdateRule):
        return kernel
    if isinstance(kernel, FullBK):
        raise PreconditionError(
            "the full model has no finite order and cannot be simulated; use a truncation",
            {"kernel": kernel.label},
        )
    return kernel.update_rule()


def require_monotone(kernel: Union[BaseKernel, FullBK]) -> None:
    """
    Raises:
        PreconditionError: Kernel without a monotone update function
    """
    if isinstance(kernel, FullBK):
        simulation_rule(kernel)
    if getattr(kernel, "attractive_by_construction", False):
        return
    table = kernel if isinstance(kernel, TableKernel) else kernel.to_table()
    if not check_attractive(table):
        raise PreconditionError(
            "monotone CFTP needs an attractive kernel",
            {"kernel": kernel.label},
        )


def _initial_bits(past: Past, order: int) -> int:
    if isinstance(past, Context):
        if past.order < order:
            raise ContextTooShortError(f"past of order {past.order} is shorter than the kernel order {order}")
        return past.bits & mask(order)
    return mask(order) if SpinSymbol.parse(past) == SpinSymbol.PLUS else 0


def _window(window: Window) -> Window:
    a, b = int(window[0]), int(window[1])
    if b < a:
        raise ParameterError(f"empty time window [{a}, {b}]")
    return a, b


def _resolve(value: Optional[int], fallback: int) -> int:
    return fallback if value is None else int(value)


# ============================================================================
# Forward simulation
# ============================================================================

def run_bits(rule: UpdateRule, bits: int, raws: Sequence[int]) -> List[int]:
    """Symbol bits produced by the rule from an initial context over the given uniforms."""
    order = rule.order
    step = rule.step
    out = []
    for n in raws:
        b = step(bits, n)
        out.append(b)
        bits = ((bits << 1) | b) & mask(order)
    return out


def forward_simulate(
    kernel: Union[BaseKernel, UpdateRule],
    past: Past,
    start: int,
    end: int,
    stream: RandomnessStream,
) -> List[int]:
    """
    Symbols x_start..x_end obtained by applying the update function
    recursively from a fixed past.

    Args:
        kernel: Finite-order kernel or compiled update rule
        past: Context (x_{start-1} first) or a constant +1/-1 past
        start: First time index
        end: Last time index (inclusive)
        stream: Uniform stream

    Returns:
        List of +1/-1 symbols

    Raises:
        ContextTooShortError: Past shorter than the kernel order
    """
    rule = simulation_rule(kernel)
    bits = _initial_bits(past, rule.order)
    raws = stream.raw_range(start, end).tolist()
    return [1 if b else -1 for b in run_bits(rule, bits, raws)]


# ============================================================================
# Regeneration
# ============================================================================

def regeneration_time(
    m: int,
    epsilon: Any,
    stream: RandomnessStream,
    cap: Optional[int] = None,
    origin: int = 0,
) -> int:
    """
    eta = min{ i >= m-1 : U_{origin-j} < 2 eps for j = i-m+1, ..., i }.

    Args:
        m: Run length (context order)
        epsilon: Noise parameter
        stream: Uniform stream
        cap: Maximum scan length (default: settings cftp.scan_cap)
        origin: Time the scan starts from

    Raises:
        ParameterError: m < 1
        ScanOverflowError: No regeneration within cap steps
    """
    if m < 1:
        raise ParameterError(f"regeneration order must be >= 1, got {m}")
    threshold = dyadic_threshold(2 * to_q(epsilon))
    return _regeneration_scan(m, threshold, stream, cap, origin)


def _regeneration_scan(
    m: int, threshold: int, stream: RandomnessStream, cap: Optional[int], origin: int
) -> int:
    cap = _resolve(cap, default_settings().cftp.scan_cap)
    limit = np.uint64(threshold)
    carry = 0
    offset = 0
    while offset < cap:
        size = min(SCAN_CHUNK, cap - offset)
        # positions origin-offset down to origin-offset-size+1, in scan order
        raws = stream.raw_range(origin - offset - size + 1, origin - offset)[::-1]
        hits = raws < limit
        index = np.arange(size)
        last_miss = np.maximum.accumulate(np.where(hits, -1 - carry, index))
        runs = index - last_miss
        done = np.flatnonzero(runs >= m)
        if done.size:
            return offset + int(done[0])
        carry = int(runs[-1])
        offset += size
    raise ScanOverflowError(
        f"no regeneration of order {m} within {cap} steps",
        {"order": m, "cap": cap, "stream": stream.describe()},
    )


def kernel_regeneration_time(
    kernel: Union[BaseKernel, UpdateRule],
    stream: RandomnessStream,
    cap: Optional[int] = None,
    origin: int = 0,
) -> Optional[int]:
    """Regeneration time of a kernel's update rule; None when it has no base cells."""
    rule = simulation_rule(kernel)
    if rule.order == 0:
        return 0
    threshold = rule.base_threshold()
    if threshold is None:
        return None
    return _regeneration_scan(rule.order, threshold, stream, cap, origin)


# ============================================================================
# Monotone coupling from the past
# ============================================================================

def sandwich_run(rule: UpdateRule, raws: Sequence[int]) -> Tuple[List[int], List[int]]:
    """
    Run the chains started from the constant +1 and -1 pasts on the same uniforms.

    Raises:
        CouplingInvariantError: Lower chain above the upper chain at some time
    """
    order = rule.order
    full = mask(order)
    step = rule.step
    hi_bits, lo_bits = full, 0
    upper, lower = [], []
    for t, n in enumerate(raws):
        hb = step(hi_bits, n)
        lb = step(lo_bits, n) if lo_bits != hi_bits else hb
        if lb > hb:
            raise CouplingInvariantError(
                "monotone sandwich violated: lower chain above upper chain",
                {"step": t},
            )
        upper.append(hb)
        lower.append(lb)
        hi_bits = ((hi_bits << 1) | hb) & full
        lo_bits = ((lo_bits << 1) | lb) & full
    return upper, lower


def _coalesces(rule: UpdateRule, stream: RandomnessStream, window: Window, horizon: int) -> Optional[List[int]]:
    """Common window values when the chains started at a-horizon agree on the window."""
    a, b = window
    raws = stream.raw_range(a - horizon, b).tolist()
    upper, lower = sandwich_run(rule, raws)
    width = b - a + 1
    if upper[-width:] == lower[-width:]:
        return upper[-width:]
    return None


def window_coalescence(
    rule: UpdateRule, stream: RandomnessStream, window: Window, horizon_cap: int
) -> Tuple[int, List[int]]:
    """
    Smallest horizon i with agreement on the window, and the coalesced bits.

    Horizons 0, 1, 2, 4, ... are tried on the same uniforms; agreement is
    monotone in i, so the exact minimum is then found by bisection.

    Raises:
        HorizonOverflowError: No coalescence within horizon_cap
    """
    if rule.order == 0:
        a, b = window
        raws = stream.raw_range(a, b).tolist()
        return 0, run_bits(rule, 0, raws)

    failed = -1
    horizon = 0
    while True:
        bits = _coalesces(rule, stream, window, horizon)
        if bits is not None:
            break
        failed = horizon
        if horizon >= horizon_cap:
            raise HorizonOverflowError(
                f"no coalescence within horizon {horizon_cap}",
                {"horizon_cap": horizon_cap, "window": list(window), "stream": stream.describe()},
            )
        horizon = min(max(1, 2 * horizon), horizon_cap)
        logger.debug(f"Extending CFTP horizon to {horizon}")

    lo, hi = failed, horizon
    while hi - lo > 1:
        mid = (lo + hi) // 2
        candidate = _coalesces(rule, stream, window, mid)
        if candidate is None:
            lo = mid
        else:
            hi, bits = mid, candidate
    return hi, bits


def coalescence_time(
    kernel: Union[BaseKernel, UpdateRule],
    stream: RandomnessStream,
    horizon: Optional[int] = None,
    time: int = 0,
) -> Union[int, NotCoalesced]:
    """
    theta: smallest i <= horizon such that the chains started at time-i from
    the +1 and -1 pasts produce the same symbol at ``time``.

    Returns:
        theta, or NotCoalesced(horizon) when the horizon is too short
    """
    if not isinstance(kernel, UpdateRule):
        require_monotone(kernel)
    rule = simulation_rule(kernel)
    horizon = _resolve(horizon, default_settings().cftp.horizon_cap)
    try:
        theta, _ = window_coalescence(rule, stream, (time, time), horizon)
    except HorizonOverflowError:
        return NotCoalesced(horizon)
    return theta


def _check_order(theta: Optional[int], eta: Optional[int]) -> None:
    if theta is not None and eta is not None and theta > eta:
        raise CouplingInvariantError(
            f"coalescence time {theta} exceeds regeneration time {eta}",
            {"theta": theta, "eta": eta},
        )


def perfect_sample(
    kernel: Union[BaseKernel, FullBK],
    window: Window,
    stream: RandomnessStream,
    method: Union[Method, str] = Method.MONOTONE_SANDWICH,
    horizon_cap: Optional[int] = None,
    scan_cap: Optional[int] = None,
    with_regeneration: bool = True,
) -> CftpResult:
    """
    Stationary block x_a..x_b of an attractive finite-order kernel.

    Args:
        kernel: Attractive finite-order kernel
        window: (a, b), inclusive
        stream: Uniform stream
        method: MONOTONE_SANDWICH doubles the backward horizon until the
            extremal chains agree on the window; REGENERATION_WINDOW scans
            back to the regeneration time and runs forward from any past
        horizon_cap: Maximum backward horizon
        scan_cap: Maximum regeneration scan length
        with_regeneration: Also compute eta for the sandwich method

    Raises:
        PreconditionError: Non-attractive or infinite-order kernel
        HorizonOverflowError / ScanOverflowError: Caps exceeded
        CouplingInvariantError: theta > eta or a broken sandwich
    """
    method = Method(method)
    require_monotone(kernel)
    rule = simulation_rule(kernel)
    window = _window(window)
    settings = default_settings().cftp
    horizon_cap = _resolve(horizon_cap, settings.horizon_cap)
    a, b = window

    if method == Method.MONOTONE_SANDWICH:
        theta, bits = window_coalescence(rule, stream, window, horizon_cap)
        eta = kernel_regeneration_time(rule, stream, scan_cap, origin=a) if with_regeneration else None
    else:
        eta = kernel_regeneration_time(rule, stream, scan_cap, origin=a)
        if eta is None:
            raise PreconditionError(
                "regeneration sampling needs an update rule with base cells",
                {"kernel": kernel.label},
            )
        raws = stream.raw_range(a - eta, b).tolist()
        bits = run_bits(rule, 0, raws)[-(b - a + 1):]
        theta = None
    _check_order(theta, eta)

    return CftpResult(
        window=window,
        sample=tuple(1 if x else -1 for x in bits),
        coalescence_time=theta,
        regeneration_time=eta,
        method=method,
        stream=stream.describe(),
    )


@dataclass
class CoupledSample:
    """Blocks of several kernels driven by one stream."""

    labels: List[str]
    results: List[CftpResult]

    @property
    def blocks(self) -> List[Tuple[int, ...]]:
        return [r.sample for r in self.results]

    def to_dict(self) -> Dict[str, Any]:
        return {"labels": self.labels, "results": [r.to_dict() for r in self.results]}


def coupled_perfect_sample(
    kernels: Sequence[BaseKernel],
    window: Window,
    stream: RandomnessStream,
    horizon_cap: Optional[int] = None,
) -> CoupledSample:
    """
    Stationary blocks for several attractive kernels from the same realized
    uniforms (each kernel through its own partition).

    Every coalesced block is the same deterministic function of (U_j), so the
    joint law is the coupling induced by the update functions.
    """
    results = [
        perfect_sample(k, window, stream, Method.MONOTONE_SANDWICH, horizon_cap, with_regeneration=False)
        for k in kernels
    ]
    return CoupledSample(labels=[k.label for k in kernels], results=results)
