"""Closed-form bounds: regeneration mean, magnetization and concentration."""

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Optional, Union

from src.bounds.logspace import LogSpaceValue, Outcome, as_logspace
from src.errors import HypothesisError, ParameterError
from src.kernels.params import ModelParams
from src.utils.logger import get_logger
from src.utils.rationals import qstr

logger = get_logger(__name__)

OrderLike = Union[int, LogSpaceValue]


def eta_mean_bound(m: OrderLike, epsilon: Fraction) -> LogSpaceValue:
    """
    m / (2 eps)**m, the bound on the mean regeneration (and coalescence) time.

    m = 0 gives 0 (order-0 chains regenerate immediately).
    """
    epsilon = Fraction(epsilon)
    if not 0 < epsilon < Fraction(1, 2):
        raise ParameterError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    m = as_logspace(m)
    if m.sign == 0:
        return LogSpaceValue.zero()
    if m.sign < 0:
        raise ParameterError("order must be nonnegative")
    return m * LogSpaceValue.power(1 / (2 * epsilon), m)


def expected_eta(m: int, epsilon: Fraction) -> Fraction:
    """
    Exact mean of the regeneration time of order m:
    (1 - p**m) / ((1 - p) p**m) - 1 with p = 2 eps.
    """
    if m < 1:
        raise ParameterError(f"regeneration order must be >= 1, got {m}")
    p = 2 * Fraction(epsilon)
    return (1 - p ** m) / ((1 - p) * p ** m) - 1


def weight_gap(params: ModelParams, r: int, k: int) -> Fraction:
    """sum_{j >= k+2} lambda_j - sum_{j=r+1}^{k+1} lambda_j."""
    weights = params.weights
    return weights.tail_sum(k + 2) - weights.partial_sum(r + 1, k + 1)


def magnetization_lower_bound(params: ModelParams, r: int, k: int) -> Fraction:
    """
    (1 - 2 eps) * gap, a lower bound on E[Y_0] for the stationary mixed(r, k+1) chain.

    Raises:
        HypothesisError: gap <= 0
    """
    if not 0 <= r < k + 1:
        raise ParameterError(f"need 0 <= r < k+1, got r={r}, k={k}")
    gap = weight_gap(params, r, k)
    if gap <= 0:
        raise HypothesisError(
            f"tail sum from {k + 2} does not exceed the sum over {r + 1}..{k + 1}",
            {
                "inequality": f"sum_{{j>={k + 2}}} lambda_j > sum_{{j={r + 1}}}^{{{k + 1}}} lambda_j",
                "tail": qstr(params.weights.tail_sum(k + 2)),
                "block": qstr(params.weights.partial_sum(r + 1, k + 1)),
            },
        )
    return params.noise_free * gap


def concentration_rhs(
    params: ModelParams,
    r: int,
    k: int,
    theta_mean_bound: Optional[LogSpaceValue] = None,
    magnetization: Optional[Fraction] = None,
) -> LogSpaceValue:
    """
    2 exp(-m_{k+1} E**2 / (8 (1 + theta)**2)).

    Args:
        params: Model parameters
        r, k: Mixed kernel indices (r < k+1)
        theta_mean_bound: Bound on the mean coalescence time of the order-r
            chain (default: eta_mean_bound(m_r, eps))
        magnetization: E[Y_0] (default: magnetization_lower_bound)
    """
    if theta_mean_bound is None:
        theta_mean_bound = eta_mean_bound(params.orders.value(r), params.epsilon)
    if magnetization is None:
        magnetization = magnetization_lower_bound(params, r, k)
    magnetization = as_logspace(magnetization)
    if magnetization.sign == 0:
        return LogSpaceValue.of(2)
    m_next = params.orders.value(k + 1)
    exponent = m_next * magnetization ** 2 / (8 * (1 + theta_mean_bound) ** 2)
    return 2 * exponent.exp_neg()


@dataclass
class MagnetizationCheck:
    r: int
    k: int
    magnetization: float
    bound: Fraction
    exact: bool
    outcome: Outcome

    def to_dict(self) -> Dict[str, Any]:
        return {
            "r": self.r,
            "k": self.k,
            "magnetization": self.magnetization,
            "bound": qstr(self.bound),
            "exact": self.exact,
            "outcome": self.outcome.value,
        }


def magnetization_check(params: ModelParams, r: int, k: int) -> MagnetizationCheck:
    """E[Y_0] = 2 mu(x_0 = 1) - 1 for the stationary mixed(r, k+1) chain against the lower bound."""
    from src.exact.transfer import marginal_plus, stationary
    from src.kernels.bk_kernels import mixed

    bound = magnetization_lower_bound(params, r, k)
    dist = stationary(mixed(params, r, k + 1))
    plus = marginal_plus(dist)
    value = 2 * plus - 1
    holds = value >= bound if dist.exact else value >= float(bound)
    return MagnetizationCheck(
        r=r,
        k=k,
        magnetization=float(value),
        bound=bound,
        exact=dist.exact,
        outcome=Outcome.YES if holds else Outcome.NO,
    )
