"""Binary alphabet and finite pasts (contexts).

A context of order m is stored as an int bitmask: bit i is set iff the
symbol at lag i+1 (``symbols[i]``, most recent first) is +1.
"""

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, Iterator, Sequence, Tuple

from src.errors import ContextTooShortError, ParameterError


class SpinSymbol(IntEnum):
    MINUS = -1
    PLUS = 1

    @classmethod
    def parse(cls, value: int) -> "SpinSymbol":
        if value not in (-1, 1):
            raise ParameterError(f"symbol must be -1 or +1, got {value!r}")
        return cls(value)

    @property
    def bit(self) -> int:
        return 1 if self == SpinSymbol.PLUS else 0


class WindowConvention(str, Enum):
    """Which past symbols a majority window of size m reads."""

    RECENT = "recent"        # symbols[0:m]
    SKIP_ONE = "skip_one"    # symbols[1:m+1]

    def span(self, m: int) -> int:
        """Context length a window of size m needs."""
        if m == 0:
            return 0
        return m if self == WindowConvention.RECENT else m + 1


def mask(order: int) -> int:
    return (1 << order) - 1


def push(bits: int, symbol_bit: int, order: int) -> int:
    """Context after emitting a symbol: the new symbol becomes symbols[0]."""
    return ((bits << 1) | symbol_bit) & mask(order)


def majority_bit(bits: int, m: int, convention: WindowConvention = WindowConvention.RECENT) -> int:
    """1 if the window of size m (odd) has more +1 than -1 symbols."""
    if convention == WindowConvention.SKIP_ONE:
        bits >>= 1
    return 1 if 2 * (bits & mask(m)).bit_count() > m else 0


@dataclass(frozen=True)
class Context:
    """Finite past, most recent symbol first."""

    bits: int
    order: int

    def __post_init__(self):
        if self.order < 0:
            raise ParameterError("context order must be nonnegative")
        if self.bits < 0 or self.bits > mask(self.order):
            raise ParameterError(f"bits {self.bits} out of range for order {self.order}")

    @classmethod
    def of(cls, symbols: Sequence[int]) -> "Context":
        bits = 0
        for i, s in enumerate(symbols):
            bits |= SpinSymbol.parse(int(s)).bit << i
        return cls(bits=bits, order=len(symbols))

    @classmethod
    def constant(cls, symbol: int, order: int) -> "Context":
        return cls(bits=mask(order) if SpinSymbol.parse(symbol) == SpinSymbol.PLUS else 0, order=order)

    @classmethod
    def empty(cls) -> "Context":
        return cls(bits=0, order=0)

    @property
    def symbols(self) -> Tuple[int, ...]:
        return tuple(1 if (self.bits >> i) & 1 else -1 for i in range(self.order))

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.order:
            raise IndexError(i)
        return 1 if (self.bits >> i) & 1 else -1

    def __len__(self) -> int:
        return self.order

    def truncate(self, order: int) -> "Context":
        """Keep the ``order`` most recent symbols."""
        if order > self.order:
            raise ContextTooShortError(f"cannot truncate order {self.order} context to {order}")
        return Context(bits=self.bits & mask(order), order=order)

    def prepend(self, symbol: int) -> "Context":
        """a.x: the context one step later, one symbol longer."""
        bit = SpinSymbol.parse(symbol).bit
        return Context(bits=(self.bits << 1) | bit, order=self.order + 1)

    def flipped(self) -> "Context":
        return Context(bits=self.bits ^ mask(self.order), order=self.order)

    def __str__(self) -> str:
        return "".join("+" if s > 0 else "-" for s in self.symbols) or "()"


def all_contexts(order: int) -> Iterator[Context]:
    for bits in range(1 << order):
        yield Context(bits=bits, order=order)


def bits_to_string(bits: int, order: int) -> str:
    """Most-recent-first '+'/'-' rendering, used in CSV exports."""
    return "".join("+" if (bits >> i) & 1 else "-" for i in range(order))


def as_symbols(values: Iterable[int]) -> Tuple[int, ...]:
    return tuple(int(SpinSymbol.parse(int(v))) for v in values)
