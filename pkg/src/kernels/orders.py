"""Odd, strictly increasing order sequences m_1 < m_2 < ...

Entries are exact ints while they fit under the exact bit cap and
log2-space values beyond (m_0 = 0 by convention).
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Sequence

from src.bounds import logspace
from src.bounds.logspace import Interval, LogSpaceValue
from src.errors import ConfigError, ParameterError, UnrepresentableError
from src.utils.logger import get_logger

logger = get_logger(__name__)


class OrderSequence(ABC):
    """Base class for order sequences."""

    formula: str = "abstract"

    @abstractmethod
    def _value(self, j: int) -> LogSpaceValue:
        """m_j for j >= 1."""

    @abstractmethod
    def describe(self) -> Any:
        """JSON descriptor: a list, or {formula, params}."""

    def length(self) -> Optional[int]:
        """Number of defined entries, None when infinite."""
        return None

    def is_defined(self, j: int) -> bool:
        n = self.length()
        return j == 0 or (j >= 1 and (n is None or j <= n))

    def value(self, j: int) -> LogSpaceValue:
        """m_j as a LogSpaceValue; m_0 = 0."""
        if j == 0:
            return LogSpaceValue.zero()
        if not self.is_defined(j):
            raise ParameterError(f"order m_{j} is not defined for this sequence")
        return self._value(j)

    def exact(self, j: int) -> int:
        """m_j as an int; raises when only a log2-space value exists."""
        v = self.value(j)
        if not v.is_exact:
            raise UnrepresentableError(f"order m_{j} exceeds the exact bit cap")
        return v.exact.numerator

    def exact_or_none(self, j: int) -> Optional[int]:
        """m_j when defined and exact, else None."""
        if not self.is_defined(j):
            return None
        try:
            return self.exact(j)
        except UnrepresentableError:
            return None

    def prefix(self, k: int) -> List[int]:
        """[m_1, ..., m_k] as ints, validated odd and increasing."""
        orders = [self.exact(j) for j in range(1, k + 1)]
        _validate(orders)
        return orders


def _validate(orders: Sequence[int]) -> None:
    previous = 0
    for j, m in enumerate(orders, start=1):
        if m <= 0 or m % 2 == 0:
            raise ParameterError(f"order m_{j} = {m} must be a positive odd integer")
        if m <= previous:
            raise ParameterError(f"orders must increase strictly (m_{j} = {m} <= {previous})")
        previous = m


class ExplicitOrders(OrderSequence):
    """A finite list of orders."""

    formula = "explicit"

    def __init__(self, orders: Sequence[int]):
        orders = [int(m) for m in orders]
        if not orders:
            raise ParameterError("explicit order list is empty")
        _validate(orders)
        self.orders = tuple(orders)

    def length(self) -> Optional[int]:
        return len(self.orders)

    def _value(self, j: int) -> LogSpaceValue:
        return LogSpaceValue.of(self.orders[j - 1])

    def describe(self) -> Any:
        return list(self.orders)


class ArithmeticOrders(OrderSequence):
    """m_j = start + (j - 1) * step (odd start, even positive step)."""

    formula = "arithmetic"

    def __init__(self, start: int = 1, step: int = 2):
        if start <= 0 or start % 2 == 0:
            raise ParameterError("arithmetic orders need an odd positive start")
        if step <= 0 or step % 2:
            raise ParameterError("arithmetic orders need an even positive step")
        self.start = start
        self.step = step

    def _value(self, j: int) -> LogSpaceValue:
        return LogSpaceValue.of(self.start + (j - 1) * self.step)

    def describe(self) -> Any:
        return {"formula": self.formula, "params": {"start": self.start, "step": self.step}}


class TowerOrders(OrderSequence):
    """m_1 = first, m_{j+1} = base ** m_j."""

    formula = "tower"

    def __init__(self, first: int = 217, base: int = 577):
        if first <= 0 or first % 2 == 0:
            raise ParameterError("tower orders need an odd positive first entry")
        if base < 3 or base % 2 == 0:
            raise ParameterError(f"tower base must be odd and >= 3, got {base}")
        self.first = first
        self.base = base
        self._cache: List[LogSpaceValue] = [LogSpaceValue.of(first)]

    def _value(self, j: int) -> LogSpaceValue:
        while len(self._cache) < j:
            previous = self._cache[-1]
            self._cache.append(LogSpaceValue.power(self.base, previous))
            logger.debug(f"tower order m_{len(self._cache)} = {self._cache[-1].approx()}")
        return self._cache[j - 1]

    def describe(self) -> Any:
        return {"formula": self.formula, "params": {"first": self.first, "base": self.base}}


class DoubleExponentialOrders(OrderSequence):
    """m_j = largest odd integer <= 2**(c j**2), i.e. 2**(c j**2) - 1."""

    formula = "double_exponential"

    def __init__(self, c: int):
        if not isinstance(c, int) or c < 1:
            raise ParameterError(f"double-exponential constant c must be an integer >= 1, got {c!r}")
        self.c = c

    def _value(self, j: int) -> LogSpaceValue:
        exponent = self.c * j * j
        if exponent + 1 <= logspace.exact_bit_cap():
            return LogSpaceValue.of((1 << exponent) - 1)
        # 2**n - 1 and 2**n agree far below the interval precision
        return LogSpaceValue.from_log2(Interval.point(exponent))

    def exponent(self, j: int) -> int:
        return self.c * j * j

    def describe(self) -> Any:
        return {"formula": self.formula, "params": {"c": self.c}}


def create_orders(descriptor: Any) -> OrderSequence:
    """
    Build an order sequence from a list or a {formula, params} descriptor.

    Raises:
        ConfigError: Unknown formula or malformed descriptor
    """
    if isinstance(descriptor, list):
        return ExplicitOrders(descriptor)
    if not isinstance(descriptor, dict):
        raise ConfigError("orders must be a list or a {formula, params} object")
    formula = descriptor.get("formula")
    params = descriptor.get("params", {}) or {}
    if formula == "explicit":
        return ExplicitOrders(params.get("values", []))
    elif formula == "arithmetic":
        return ArithmeticOrders(int(params.get("start", 1)), int(params.get("step", 2)))
    elif formula == "tower":
        return TowerOrders(int(params.get("first", 217)), int(params.get("base", 577)))
    elif formula == "double_exponential":
        return DoubleExponentialOrders(int(params["c"]))
    raise ConfigError(
        f"Unknown order formula: {formula!r}",
        {"supported": ["explicit", "arithmetic", "tower", "double_exponential"]},
    )
