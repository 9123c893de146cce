"""Base abstract class for finite-order kernels."""

from abc import ABC, abstractmethod
from fractions import Fraction
from typing import TYPE_CHECKING, Any, Dict

from src.errors import ContextTooShortError
from src.kernels.symbols import Context, SpinSymbol

if TYPE_CHECKING:
    from src.kernels.partition import UpdateRule
    from src.kernels.table_kernel import TableKernel


class BaseKernel(ABC):
    """
    Abstract base class for binary kernels of finite Markov order.

    Subclasses give P(+1 | context) on contexts of exactly ``order`` symbols;
    everything else (evaluation on longer pasts, tables, update rules) is
    derived from that.
    """

    order: int

    @abstractmethod
    def prob_plus(self, bits: int) -> Fraction:
        """
        P(+1 | context) for a context of exactly ``self.order`` symbols.

        Args:
            bits: Context bitmask (bit i set iff symbols[i] == +1)

        Returns:
            Exact probability
        """

    @abstractmethod
    def update_rule(self) -> "UpdateRule":
        """Update function realizing the kernel from one uniform per step."""

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        """JSON descriptor of the kernel."""

    @property
    def label(self) -> str:
        return type(self).__name__

    @property
    def attractive_by_construction(self) -> bool:
        return False

    def evaluate(self, a: int, ctx: Context) -> Fraction:
        """
        P(a | ctx) for a context at least as long as the kernel order.

        Raises:
            ContextTooShortError: If ctx.order < self.order
        """
        symbol = SpinSymbol.parse(a)
        if ctx.order < self.order:
            raise ContextTooShortError(
                f"{self.label} needs a context of order {self.order}, got {ctx.order}"
            )
        p = self.prob_plus(ctx.bits & ((1 << self.order) - 1))
        return p if symbol == SpinSymbol.PLUS else 1 - p

    def to_table(self, order: int = None) -> "TableKernel":
        """Tabulate the kernel over all contexts of ``order`` (default: own order)."""
        from src.kernels.table_kernel import TableKernel

        order = self.order if order is None else order
        if order < self.order:
            raise ContextTooShortError(f"cannot tabulate {self.label} at order {order} < {self.order}")
        own_mask = (1 << self.order) - 1
        cache: Dict[int, Fraction] = {}
        values = []
        for bits in range(1 << order):
            key = bits & own_mask
            if key not in cache:
                cache[key] = self.prob_plus(key)
            values.append(cache[key])
        return TableKernel(order, values)

    def check_attractive(self) -> bool:
        from src.kernels.table_kernel import check_attractive

        return check_attractive(self.to_table())

    def __repr__(self) -> str:
        return f"{self.label}(order={self.order})"
