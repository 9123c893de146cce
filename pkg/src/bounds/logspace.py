"""Exact / log2-space numbers with sound comparisons.

A ``LogSpaceValue`` is either an exact rational (while its bit length stays
under the exact cap) or a sign plus an outward-rounded interval enclosing
log2 of its magnitude. Comparisons whose intervals overlap report
``Ordering.INDETERMINATE``.
"""

from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterator, Optional, Union

import mpmath
from mpmath import mp, mpf

from src.errors import IndeterminateComparisonError, ParameterError, UnrepresentableError
from src.utils.rationals import bit_length_q, ceil_q, qstr

# Guard bits carried by every high-precision evaluation before outward widening
_GUARD_BITS = 64

_precision_bits = 256
_exact_bit_cap = 2**20
_log_magnitude_bits = 8192


def configure(
    precision_bits: Optional[int] = None,
    exact_bit_cap: Optional[int] = None,
    log_magnitude_bits: Optional[int] = None,
) -> None:
    """Set the process-wide big-number policy."""
    global _precision_bits, _exact_bit_cap, _log_magnitude_bits
    if precision_bits is not None:
        _precision_bits = int(precision_bits)
    if exact_bit_cap is not None:
        _exact_bit_cap = int(exact_bit_cap)
    if log_magnitude_bits is not None:
        _log_magnitude_bits = int(log_magnitude_bits)


@contextmanager
def extra_precision(bits: int) -> Iterator[None]:
    """Raise the working precision to at least ``bits`` inside the block."""
    global _precision_bits
    saved = _precision_bits
    _precision_bits = max(saved, int(bits))
    try:
        yield
    finally:
        _precision_bits = saved


def exact_bit_cap() -> int:
    return _exact_bit_cap


def precision_bits() -> int:
    return _precision_bits


class Ordering(str, Enum):
    LESS = "less"
    EQUAL = "equal"
    GREATER = "greater"
    INDETERMINATE = "indeterminate"


class Outcome(str, Enum):
    YES = "yes"
    NO = "no"
    INDETERMINATE = "indeterminate"


class Representation(str, Enum):
    EXACT = "exact"
    LOG2 = "log2"


# ============================================================================
# Outward-rounded real intervals
# ============================================================================

def _workprec():
    return mp.workprec(_precision_bits + _GUARD_BITS)


def _widen_down(x: mpf) -> mpf:
    slack = mpmath.ldexp(abs(x), -_precision_bits) + mpmath.ldexp(1, -4 * _precision_bits)
    return x - slack


def _widen_up(x: mpf) -> mpf:
    slack = mpmath.ldexp(abs(x), -_precision_bits) + mpmath.ldexp(1, -4 * _precision_bits)
    return x + slack


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] of mpf endpoints."""

    lo: mpf
    hi: mpf

    @classmethod
    def point(cls, value: Union[int, Fraction]) -> "Interval":
        """Enclosure of an exact rational."""
        value = Fraction(value)
        with _workprec():
            approx = mpf(value.numerator) / mpf(value.denominator)
            return cls(_widen_down(approx), _widen_up(approx))

    @classmethod
    def exact_point(cls, value: mpf) -> "Interval":
        return cls(value, value)

    def __add__(self, other: "Interval") -> "Interval":
        with _workprec():
            return Interval(_widen_down(self.lo + other.lo), _widen_up(self.hi + other.hi))

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other: "Interval") -> "Interval":
        return self + (-other)

    def __mul__(self, other: "Interval") -> "Interval":
        with _workprec():
            products = [self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi]
            return Interval(_widen_down(min(products)), _widen_up(max(products)))

    def scale(self, factor: Union[int, Fraction]) -> "Interval":
        return self * Interval.point(factor)

    def divide(self, other: "Interval") -> "Interval":
        if other.lo <= 0 <= other.hi:
            raise UnrepresentableError("interval division by an interval containing 0")
        with _workprec():
            quotients = [self.lo / other.lo, self.lo / other.hi, self.hi / other.lo, self.hi / other.hi]
            return Interval(_widen_down(min(quotients)), _widen_up(max(quotients)))

    def log2(self) -> "Interval":
        if self.lo <= 0:
            raise UnrepresentableError("log2 of a non-positive interval")
        with _workprec():
            return Interval(_widen_down(mpmath.log(self.lo, 2)), _widen_up(mpmath.log(self.hi, 2)))

    def ln(self) -> "Interval":
        if self.lo <= 0:
            raise UnrepresentableError("log of a non-positive interval")
        with _workprec():
            return Interval(_widen_down(mpmath.log(self.lo)), _widen_up(mpmath.log(self.hi)))

    def exp2(self) -> "Interval":
        """Enclosure of 2**x."""
        _check_magnitude(self)
        with mp.workprec(_precision_bits + _GUARD_BITS + _mag(self)):
            return Interval(_widen_down(mpmath.power(2, self.lo)), _widen_up(mpmath.power(2, self.hi)))

    def contains_zero(self) -> bool:
        return self.lo <= 0 <= self.hi

    def compare(self, other: "Interval") -> Ordering:
        if self.hi < other.lo:
            return Ordering.LESS
        if self.lo > other.hi:
            return Ordering.GREATER
        if self.lo == self.hi == other.lo == other.hi:
            return Ordering.EQUAL
        return Ordering.INDETERMINATE

    def mid_str(self, digits: int = 12) -> str:
        with _workprec():
            return mpmath.nstr((self.lo + self.hi) / 2, digits)


def _mag(interval: Interval) -> int:
    """Bits of magnitude of the interval endpoints (0 for small values)."""
    biggest = max(abs(interval.lo), abs(interval.hi))
    if biggest < 1:
        return 0
    return int(mpmath.floor(mpmath.log(biggest, 2))) + 1


def _check_magnitude(interval: Interval) -> None:
    if _mag(interval) > _log_magnitude_bits:
        raise UnrepresentableError(
            "log2 magnitude too large to exponentiate",
            {"log2_magnitude_bits": _mag(interval), "cap": _log_magnitude_bits},
        )


_LN2_CACHE: Dict[int, Interval] = {}


def ln2() -> Interval:
    if _precision_bits not in _LN2_CACHE:
        with _workprec():
            _LN2_CACHE[_precision_bits] = Interval(_widen_down(mp.ln2), _widen_up(+mp.ln2))
    return _LN2_CACHE[_precision_bits]


def _log2_add(a: Interval, b: Interval) -> Interval:
    """Enclosure of log2(2**a + 2**b)."""
    big, small = (a, b) if a.hi >= b.hi else (b, a)
    gap_lo = big.lo - small.hi
    if gap_lo > _precision_bits + _GUARD_BITS:
        # 2**small is below one ulp of 2**big; log2(1 + t) <= 2t
        with _workprec():
            return Interval(big.lo, _widen_up(big.hi + mpmath.ldexp(1, -int(gap_lo) + 1)))
    with _workprec():
        lo = big.lo + mpmath.log(1 + mpmath.power(2, small.lo - big.lo), 2)
        hi = big.hi + mpmath.log(1 + mpmath.power(2, small.hi - big.hi), 2)
        return Interval(_widen_down(min(lo, hi)), _widen_up(max(lo, hi)))


# ============================================================================
# LogSpaceValue
# ============================================================================

@dataclass(frozen=True, eq=False)
class LogSpaceValue:
    """Signed number held exactly or as an enclosure of log2 of its magnitude."""

    sign: int
    exact: Optional[Fraction] = None
    log2_magnitude: Optional[Interval] = None

    # ------------------------------------------------------------------ build

    @classmethod
    def of(cls, value: Union[int, Fraction]) -> "LogSpaceValue":
        value = Fraction(value)
        sign = (value > 0) - (value < 0)
        if sign != 0 and bit_length_q(value) > _exact_bit_cap:
            return cls(sign=sign, log2_magnitude=Interval.point(abs(value)).log2())
        return cls(sign=sign, exact=value)

    @classmethod
    def from_log2(cls, log2_magnitude: Interval, sign: int = 1) -> "LogSpaceValue":
        if sign == 0:
            return cls.zero()
        return cls(sign=sign, log2_magnitude=log2_magnitude)

    @classmethod
    def from_interval(cls, value: Interval) -> "LogSpaceValue":
        """Value known only as an enclosure; sign must be decided."""
        if value.lo > 0:
            return cls(sign=1, log2_magnitude=value.log2())
        if value.hi < 0:
            return cls(sign=-1, log2_magnitude=(-value).log2())
        raise IndeterminateComparisonError("sign of an interval value is undecided")

    @classmethod
    def zero(cls) -> "LogSpaceValue":
        return cls(sign=0, exact=Fraction(0))

    @classmethod
    def power(cls, base: Fraction, exponent: "LogSpaceValue") -> "LogSpaceValue":
        """base ** exponent for rational base > 0 and nonnegative exponent."""
        base = Fraction(base)
        if base <= 0:
            raise ParameterError("power base must be positive")
        if exponent.sign < 0:
            raise ParameterError("power exponent must be nonnegative")
        if exponent.sign == 0:
            return cls.of(1)
        if exponent.is_exact and exponent.exact.denominator == 1:
            n = exponent.exact.numerator
            if n * bit_length_q(base) <= _exact_bit_cap:
                return cls.of(base ** n)
        return cls.from_log2(exponent.value_interval() * Interval.point(base).log2())

    # ------------------------------------------------------------ properties

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    @property
    def representation(self) -> Representation:
        return Representation.EXACT if self.is_exact else Representation.LOG2

    def log2_interval(self) -> Interval:
        """Enclosure of log2 |x|."""
        if self.sign == 0:
            raise UnrepresentableError("log2 of zero")
        if self.is_exact:
            return Interval.point(abs(self.exact)).log2()
        return self.log2_magnitude

    def value_interval(self) -> Interval:
        """Enclosure of the signed value itself."""
        if self.sign == 0:
            return Interval.exact_point(mpf(0))
        if self.is_exact:
            return Interval.point(self.exact)
        magnitude = self.log2_magnitude.exp2()
        return magnitude if self.sign > 0 else -magnitude

    # ------------------------------------------------------------ arithmetic

    def __neg__(self) -> "LogSpaceValue":
        if self.is_exact:
            return LogSpaceValue(sign=-self.sign, exact=-self.exact)
        return LogSpaceValue(sign=-self.sign, log2_magnitude=self.log2_magnitude)

    def __mul__(self, other: Any) -> "LogSpaceValue":
        other = _coerce(other)
        if self.sign == 0 or other.sign == 0:
            return LogSpaceValue.zero()
        if self.is_exact and other.is_exact:
            return LogSpaceValue.of(self.exact * other.exact)
        return LogSpaceValue.from_log2(
            self.log2_interval() + other.log2_interval(), sign=self.sign * other.sign
        )

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "LogSpaceValue":
        other = _coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("LogSpaceValue division by zero")
        if self.sign == 0:
            return LogSpaceValue.zero()
        if self.is_exact and other.is_exact:
            return LogSpaceValue.of(self.exact / other.exact)
        return LogSpaceValue.from_log2(
            self.log2_interval() - other.log2_interval(), sign=self.sign * other.sign
        )

    def __rtruediv__(self, other: Any) -> "LogSpaceValue":
        return _coerce(other) / self

    def __pow__(self, n: int) -> "LogSpaceValue":
        if not isinstance(n, int) or n < 0:
            raise ParameterError("only nonnegative integer powers are supported")
        if n == 0:
            return LogSpaceValue.of(1)
        if self.sign == 0:
            return LogSpaceValue.zero()
        sign = self.sign if n % 2 else 1
        if self.is_exact and n * bit_length_q(self.exact) <= _exact_bit_cap:
            return LogSpaceValue.of(self.exact ** n)
        return LogSpaceValue.from_log2(self.log2_interval().scale(n), sign=sign)

    def __add__(self, other: Any) -> "LogSpaceValue":
        other = _coerce(other)
        if other.sign == 0:
            return self
        if self.sign == 0:
            return other
        if self.is_exact and other.is_exact:
            return LogSpaceValue.of(self.exact + other.exact)
        if self.sign == other.sign:
            return LogSpaceValue.from_log2(
                _log2_add(self.log2_interval(), other.log2_interval()), sign=self.sign
            )
        return LogSpaceValue.from_interval(self.value_interval() + other.value_interval())

    __radd__ = __add__

    def __sub__(self, other: Any) -> "LogSpaceValue":
        return self + (-_coerce(other))

    def __rsub__(self, other: Any) -> "LogSpaceValue":
        return _coerce(other) - self

    def ln(self) -> "LogSpaceValue":
        """Natural logarithm; requires a positive value."""
        if self.sign <= 0:
            raise ParameterError("ln of a non-positive value")
        if self.is_exact and self.exact == 1:
            return LogSpaceValue.zero()
        value = self.log2_interval() * ln2()
        return LogSpaceValue.from_interval(value)

    def log2(self) -> "LogSpaceValue":
        """log2 as a value; requires a positive value."""
        if self.sign <= 0:
            raise ParameterError("log2 of a non-positive value")
        if self.is_exact:
            value = self.exact
            if value.denominator == 1 and value.numerator & (value.numerator - 1) == 0:
                return LogSpaceValue.of(value.numerator.bit_length() - 1)
        return LogSpaceValue.from_interval(self.log2_interval())

    def exp_neg(self) -> "LogSpaceValue":
        """exp(-x) for x >= 0."""
        if self.sign < 0:
            raise ParameterError("exp_neg expects a nonnegative argument")
        if self.sign == 0:
            return LogSpaceValue.of(1)
        log2_e = Interval.point(1).divide(ln2())
        return LogSpaceValue.from_log2(-(self.value_interval() * log2_e))

    # ------------------------------------------------------------ comparison

    def compare(self, other: Any) -> Ordering:
        other = _coerce(other)
        if self.sign != other.sign:
            return Ordering.LESS if self.sign < other.sign else Ordering.GREATER
        if self.sign == 0:
            return Ordering.EQUAL
        if self.is_exact and other.is_exact:
            if self.exact < other.exact:
                return Ordering.LESS
            if self.exact > other.exact:
                return Ordering.GREATER
            return Ordering.EQUAL
        magnitude = self.log2_interval().compare(other.log2_interval())
        if self.sign > 0 or magnitude in (Ordering.EQUAL, Ordering.INDETERMINATE):
            return magnitude
        return Ordering.GREATER if magnitude == Ordering.LESS else Ordering.LESS

    def le(self, other: Any) -> Outcome:
        """Outcome of self <= other."""
        ordering = self.compare(other)
        if ordering == Ordering.INDETERMINATE:
            return Outcome.INDETERMINATE
        return Outcome.YES if ordering in (Ordering.LESS, Ordering.EQUAL) else Outcome.NO

    def lt(self, other: Any) -> Outcome:
        """Outcome of self < other."""
        ordering = self.compare(other)
        if ordering == Ordering.INDETERMINATE:
            return Outcome.INDETERMINATE
        return Outcome.YES if ordering == Ordering.LESS else Outcome.NO

    def ge(self, other: Any) -> Outcome:
        return _coerce(other).le(self)

    # -------------------------------------------------------------- display

    def approx(self, digits: int = 12) -> str:
        """Short decimal rendering for logs and reports."""
        if self.sign == 0:
            return "0"
        if self.is_exact and bit_length_q(self.exact) <= 64:
            with _workprec():
                return mpmath.nstr(mpf(self.exact.numerator) / self.exact.denominator, digits)
        prefix = "-" if self.sign < 0 else ""
        return f"{prefix}2^{self.log2_interval().mid_str(digits)}"

    def to_dict(self) -> Dict[str, Any]:
        if self.is_exact:
            text = qstr(self.exact) if bit_length_q(self.exact) <= 4096 else None
            return {
                "representation": Representation.EXACT.value,
                "value": text,
                "bits": bit_length_q(self.exact),
                "approx": self.approx(),
            }
        magnitude = self.log2_magnitude
        with _workprec():
            return {
                "representation": Representation.LOG2.value,
                "sign": self.sign,
                "log2_lower": mpmath.nstr(magnitude.lo, 20),
                "log2_upper": mpmath.nstr(magnitude.hi, 20),
                "approx": self.approx(),
            }

    def __repr__(self) -> str:
        return f"LogSpaceValue({self.representation.value}, {self.approx()})"


def _coerce(value: Any) -> LogSpaceValue:
    if isinstance(value, LogSpaceValue):
        return value
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return LogSpaceValue.of(value)
    raise TypeError(f"cannot use {type(value).__name__} as a LogSpaceValue")


def as_logspace(value: Union[int, Fraction, LogSpaceValue]) -> LogSpaceValue:
    return _coerce(value)


def ceil_int(value: LogSpaceValue) -> int:
    """
    Exact ceiling of a value.

    Raises:
        IndeterminateComparisonError: The enclosure straddles an integer
    """
    if value.is_exact:
        return ceil_q(value.exact)
    enclosure = value.value_interval()
    with _workprec():
        lo, hi = mpmath.ceil(enclosure.lo), mpmath.ceil(enclosure.hi)
    if lo != hi:
        raise IndeterminateComparisonError(
            "ceiling undecided at the current precision", {"approx": value.approx()}
        )
    return int(lo)


def require_decided(outcome: Outcome, what: str) -> bool:
    """Turn an outcome into a bool, refusing indeterminate comparisons."""
    if outcome == Outcome.INDETERMINATE:
        raise IndeterminateComparisonError(f"comparison undecided: {what}")
    return outcome == Outcome.YES
