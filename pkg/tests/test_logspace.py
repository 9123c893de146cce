"""Exact / log2-space numbers and the rational wire format."""

import math
from fractions import Fraction

import numpy as np
import pytest

from src.bounds.logspace import Interval, LogSpaceValue, Outcome, Representation, ceil_int, require_decided
from src.errors import ConfigError, IndeterminateComparisonError, ParameterError
from src.utils.rationals import ceil_q, dyadic_threshold, qstr, to_q


class TestRationals:
    def test_parse_and_format(self):
        assert to_q("3/12") == Fraction(1, 4)
        assert to_q(7) == Fraction(7)
        assert qstr(Fraction(7, 10)) == "7/10"
        assert qstr(Fraction(2)) == "2/1"

    @pytest.mark.parametrize("value", [0.25, True, "one half", "1/0"])
    def test_inexact_values_refused(self, value):
        with pytest.raises(ConfigError):
            to_q(value)

    def test_ceiling(self):
        assert ceil_q(Fraction(7, 2)) == 4
        assert ceil_q(Fraction(-7, 2)) == -3
        assert ceil_q(Fraction(4)) == 4

    def test_dyadic_threshold(self):
        t = dyadic_threshold(Fraction(1, 2))
        assert t == 1 << 52
        assert Fraction(t - 1, 1 << 53) < Fraction(1, 2) <= Fraction(t, 1 << 53)


class TestExactValues:
    def test_small_values_stay_exact(self):
        v = LogSpaceValue.of(Fraction(3, 4)) * 8
        assert v.representation == Representation.EXACT
        assert v.exact == 6

    def test_comparisons(self):
        assert LogSpaceValue.of(3).le(4) == Outcome.YES
        assert LogSpaceValue.of(5).lt(5) == Outcome.NO
        assert LogSpaceValue.of(-2).ge(-3) == Outcome.YES

    def test_ceil(self):
        assert ceil_int(LogSpaceValue.of(Fraction(7, 2))) == 4

    def test_ln_encloses_float(self):
        enclosure = LogSpaceValue.of(4).ln().value_interval()
        assert float(enclosure.lo) <= math.log(4) <= float(enclosure.hi)

    def test_ln_of_nonpositive(self):
        with pytest.raises(ParameterError):
            LogSpaceValue.zero().ln()

    def test_integer_power_of_two_log2(self):
        v = LogSpaceValue.of(1024).log2()
        assert v.is_exact and v.exact == 10


class TestLogValues:
    def test_power_switches_to_log(self):
        big = LogSpaceValue.power(Fraction(2), LogSpaceValue.of(10**7))
        assert big.representation == Representation.LOG2
        assert big.sign == 1

    def test_huge_comparison_is_decided(self):
        a = LogSpaceValue.power(Fraction(2), LogSpaceValue.of(10**7))
        b = LogSpaceValue.power(Fraction(2), LogSpaceValue.of(10**7 - 1))
        assert a.ge(b) == Outcome.YES
        assert b.ge(a) == Outcome.NO

    def test_mixed_representations(self):
        big = LogSpaceValue.power(Fraction(3), LogSpaceValue.of(10**6))
        assert big.ge(LogSpaceValue.of(10**100)) == Outcome.YES
        assert LogSpaceValue.of(-1).lt(big) == Outcome.YES

    def test_exp_neg_is_tiny_and_positive(self):
        tiny = LogSpaceValue.of(10**6).exp_neg()
        assert tiny.sign == 1
        assert tiny.lt(Fraction(1, 10**6)) == Outcome.YES

    def test_ceil_of_huge_value_is_undecided(self):
        big = LogSpaceValue.power(Fraction(2), LogSpaceValue.of(10**7))
        with pytest.raises(IndeterminateComparisonError):
            ceil_int(big)

    def test_require_decided(self):
        assert require_decided(Outcome.YES, "x") is True
        assert require_decided(Outcome.NO, "x") is False
        with pytest.raises(IndeterminateComparisonError):
            require_decided(Outcome.INDETERMINATE, "x")

    def test_to_dict_reports_log_bounds(self):
        data = LogSpaceValue.power(Fraction(2), LogSpaceValue.of(10**7)).to_dict()
        assert data["representation"] == "log2"
        assert float(data["log2_lower"]) <= 10**7 <= float(data["log2_upper"])

    def test_power_rejects_bad_base(self):
        with pytest.raises(ParameterError):
            LogSpaceValue.power(Fraction(0), LogSpaceValue.of(2))


def _as_fraction(x) -> Fraction:
    man, exp = x.man_exp
    return Fraction(man) * Fraction(2) ** exp


def _encloses(value: LogSpaceValue, exact: Fraction) -> bool:
    enclosure = value.value_interval()
    return _as_fraction(enclosure.lo) <= exact <= _as_fraction(enclosure.hi)


def _logged(q: Fraction) -> LogSpaceValue:
    return LogSpaceValue.from_log2(Interval.point(q).log2())


class TestOutwardRounding:
    @pytest.mark.parametrize("seed", range(8))
    def test_log_arithmetic_encloses_rationals(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(25):
            a = Fraction(int(rng.integers(1, 10**9)), int(rng.integers(1, 10**9)))
            b = Fraction(int(rng.integers(1, 10**9)), int(rng.integers(1, 10**9)))
            la, lb = _logged(a), _logged(b)
            assert la.representation == Representation.LOG2
            assert _encloses(la, a)
            assert _encloses(la * lb, a * b)
            assert _encloses(la / lb, a / b)
            assert _encloses(la + lb, a + b)
            assert _encloses(la ** 3, a ** 3)

    @pytest.mark.parametrize("seed", range(4))
    def test_mixed_operands_enclose_rationals(self, seed):
        rng = np.random.default_rng(100 + seed)
        for _ in range(25):
            a = Fraction(int(rng.integers(1, 10**6)), int(rng.integers(1, 10**6)))
            n = int(rng.integers(1, 1000))
            assert _encloses(_logged(a) * n, a * n)
            assert _encloses(n * _logged(a), a * n)
            assert _encloses(_logged(a) + n, a + n)
