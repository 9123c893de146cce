"""Model parameters: epsilon, weights, orders and the majority-window convention."""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict

from src.errors import ParameterError
from src.kernels.orders import OrderSequence
from src.kernels.symbols import WindowConvention
from src.kernels.weights import WeightFamily
from src.utils.rationals import qstr


@dataclass(frozen=True)
class ModelParams:
    """
    Parameters of a Bramson-Kalikow model.

    Attributes:
        epsilon: Noise level, 0 < epsilon < 1/2
        weights: Mixture weights lambda_j
        orders: Odd increasing window sizes m_j
        convention: Majority window alignment
    """

    epsilon: Fraction
    weights: WeightFamily
    orders: OrderSequence
    convention: WindowConvention = field(default=WindowConvention.RECENT)

    def __post_init__(self):
        epsilon = Fraction(self.epsilon)
        if not 0 < epsilon < Fraction(1, 2):
            raise ParameterError(f"epsilon must lie in (0, 1/2), got {epsilon}")
        object.__setattr__(self, "epsilon", epsilon)

    @property
    def noise_free(self) -> Fraction:
        """1 - 2 epsilon."""
        return 1 - 2 * self.epsilon

    def lambda_bar(self, j: int) -> Fraction:
        """lambda_bar_0 = 2 epsilon, lambda_bar_j = lambda_j (1 - 2 epsilon)."""
        if j == 0:
            return 2 * self.epsilon
        return self.weights.weight(j) * self.noise_free

    def order(self, j: int) -> int:
        """Exact m_j (m_0 = 0)."""
        return self.orders.exact(j)

    def span(self, j: int) -> int:
        """Context length the j-th majority window reads."""
        return self.convention.span(self.order(j))

    def describe(self) -> Dict[str, Any]:
        return {
            "epsilon": qstr(self.epsilon),
            "weights": self.weights.describe(),
            "orders": self.orders.describe(),
            "convention": self.convention.value,
        }
