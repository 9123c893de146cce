"""Hoeffding bands for bounded Monte-Carlo outcomes and sample statistics."""

import math
from typing import Sequence, Tuple

import numpy as np

from src.errors import ParameterError


def _check(n: int, confidence: float) -> None:
    if n < 1:
        raise ParameterError(f"need at least one replication, got {n}")
    if not 0 < confidence < 1:
        raise ParameterError(f"confidence must lie in (0, 1), got {confidence}")


def hoeffding_halfwidth(n: int, confidence: float = 0.99, value_range: float = 1.0) -> float:
    """
    sqrt(ln(2 / delta) / (2 n)) * range, delta = 1 - confidence.

    Two-sided band for the mean of n i.i.d. outcomes taking values in an
    interval of the given length.
    """
    _check(n, confidence)
    delta = 1.0 - confidence
    return value_range * math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def hoeffding_band(
    estimate: float,
    n: int,
    confidence: float = 0.99,
    lower: float = 0.0,
    upper: float = 1.0,
) -> Tuple[float, float]:
    """Band around a mean of [lower, upper]-valued outcomes, clipped to that interval."""
    h = hoeffding_halfwidth(n, confidence, upper - lower)
    return max(lower, estimate - h), min(upper, estimate + h)


def required_replications(halfwidth: float, confidence: float = 0.99) -> int:
    """Smallest n whose [0,1] Hoeffding halfwidth is at most the target."""
    if halfwidth <= 0:
        raise ParameterError("target halfwidth must be positive")
    delta = 1.0 - confidence
    return math.ceil(math.log(2.0 / delta) / (2.0 * halfwidth ** 2))


def sample_mean(x: Sequence[float]) -> float:
    return float(np.mean(np.asarray(x, dtype=float)))


def standard_error(x: Sequence[float]) -> float:
    """Sample standard deviation over sqrt(n); nan below two samples."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return float("nan")
    return float(np.std(x, ddof=1) / np.sqrt(len(x)))


def within_band(value: float, band: Tuple[float, float]) -> bool:
    return band[0] <= value <= band[1]
