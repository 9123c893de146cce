"""Mixture weight families (lambda_j, j >= 1) with exact partial and tail sums."""

from abc import ABC, abstractmethod
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from src.bounds import logspace
from src.errors import ConfigError, ParameterError, UnrepresentableError
from src.utils.logger import get_logger
from src.utils.rationals import qstr, to_q

logger = get_logger(__name__)


class WeightFamily(ABC):
    """
    Base class for weight families.

    All families here are rational, so weights and sums are exact Fractions.
    tail_sum(1) == 1 and tail_sum(k) == tail_sum(k+1) + weight(k) hold exactly.
    """

    kind: str = "abstract"

    @abstractmethod
    def weight(self, j: int) -> Fraction:
        """lambda_j for j >= 1."""

    @abstractmethod
    def tail_sum(self, k: int) -> Fraction:
        """Sum of lambda_j over j >= k (k <= 1 gives 1)."""

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        """JSON descriptor ({kind, params})."""

    def support(self) -> Optional[int]:
        """Largest j with lambda_j > 0, or None for infinite support."""
        return None

    def partial_sum(self, a: int, b: int) -> Fraction:
        """Sum of lambda_j for a <= j <= b (0 when b < a)."""
        a = max(a, 1)
        if b < a:
            return Fraction(0)
        return self.tail_sum(a) - self.tail_sum(b + 1)

    def _check_index(self, j: int) -> None:
        if j < 1:
            raise ParameterError(f"weight index must be >= 1, got {j}")


class GeometricWeights(WeightFamily):
    """lambda_j = scale * ratio**j with scale * ratio / (1 - ratio) == 1."""

    kind = "geometric"

    def __init__(self, ratio: Fraction, scale: Optional[Fraction] = None):
        ratio = Fraction(ratio)
        if not 0 < ratio < 1:
            raise ParameterError(f"geometric ratio must lie in (0, 1), got {ratio}")
        if scale is None:
            scale = (1 - ratio) / ratio
        scale = Fraction(scale)
        if scale * ratio / (1 - ratio) != 1:
            raise ParameterError(
                f"geometric weights do not sum to 1: scale={scale}, ratio={ratio}"
            )
        self.ratio = ratio
        self.scale = scale

    def weight(self, j: int) -> Fraction:
        self._check_index(j)
        return self.scale * self.ratio ** j

    def tail_sum(self, k: int) -> Fraction:
        if k <= 1:
            return Fraction(1)
        return self.scale * self.ratio ** k / (1 - self.ratio)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "params": {"ratio": qstr(self.ratio), "scale": qstr(self.scale)}}


class Corollary1Weights(GeometricWeights):
    """lambda_j = (1/2)(2/3)**j."""

    kind = "corollary1"

    def __init__(self):
        super().__init__(Fraction(2, 3), Fraction(1, 2))

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "params": {}}


class ExplicitFiniteWeights(WeightFamily):
    """
    Listed weights lambda_1..lambda_K followed by an optional geometric tail.

    With tail_mass == 0 the support is finite (lambda_j = 0 for j > K).
    The tail puts tail_mass * (1 - rho) * rho**(i-1) on index K + i.
    """

    kind = "explicit"

    def __init__(
        self,
        values: Sequence[Fraction],
        tail_mass: Fraction = Fraction(0),
        tail_ratio: Optional[Fraction] = None,
    ):
        values = [Fraction(v) for v in values]
        tail_mass = Fraction(tail_mass)
        if not values and tail_mass == 0:
            raise ParameterError("explicit weights need at least one value or a tail")
        if any(v <= 0 for v in values):
            raise ParameterError("explicit weights must be positive")
        if tail_mass < 0:
            raise ParameterError("tail mass must be nonnegative")
        if sum(values, Fraction(0)) + tail_mass != 1:
            raise ParameterError(
                f"explicit weights sum to {sum(values, Fraction(0)) + tail_mass}, expected 1"
            )
        if tail_mass > 0:
            if tail_ratio is None:
                raise ParameterError("a positive tail mass needs a tail ratio")
            tail_ratio = Fraction(tail_ratio)
            if not 0 < tail_ratio < 1:
                raise ParameterError("tail ratio must lie in (0, 1)")
        self.values: Tuple[Fraction, ...] = tuple(values)
        self.tail_mass = tail_mass
        self.tail_ratio = tail_ratio
        # suffix[i] = sum of values[i:]
        suffix = [Fraction(0)] * (len(values) + 1)
        for i in range(len(values) - 1, -1, -1):
            suffix[i] = suffix[i + 1] + values[i]
        self._suffix = suffix

    def support(self) -> Optional[int]:
        return len(self.values) if self.tail_mass == 0 else None

    def weight(self, j: int) -> Fraction:
        self._check_index(j)
        K = len(self.values)
        if j <= K:
            return self.values[j - 1]
        if self.tail_mass == 0:
            return Fraction(0)
        i = j - K
        return self.tail_mass * (1 - self.tail_ratio) * self.tail_ratio ** (i - 1)

    def tail_sum(self, k: int) -> Fraction:
        if k <= 1:
            return Fraction(1)
        K = len(self.values)
        if k <= K:
            return self._suffix[k - 1] + self.tail_mass
        if self.tail_mass == 0:
            return Fraction(0)
        return self.tail_mass * self.tail_ratio ** (k - K - 1)

    def describe(self) -> Dict[str, Any]:
        params: Dict[str, Any] = {"values": [qstr(v) for v in self.values]}
        if self.tail_mass:
            params["tail_mass"] = qstr(self.tail_mass)
            params["tail_ratio"] = qstr(self.tail_ratio)
        return {"kind": self.kind, "params": params}


class Corollary2Weights(WeightFamily):
    """
    Block weights: block l has b_l indices each carrying (s**(l-1) - s**l) / b_l,
    with s = 3/4, b_1 = 1 and b_l = 2**((c * (b_1 + ... + b_{l-1}))**2).

    Blocks are materialized while b_l fits under the exact bit cap; indices
    beyond the last such block raise UnrepresentableError.
    """

    kind = "corollary2"
    s = Fraction(3, 4)

    def __init__(self, c: int):
        if not isinstance(c, int) or c < 1:
            raise ParameterError(f"block constant c must be an integer >= 1, got {c!r}")
        self.c = c
        self._sizes: List[int] = [1]
        self._ends: List[int] = [1]
        self._extend()

    def _extend(self) -> None:
        cap = logspace.exact_bit_cap()
        while True:
            exponent = (self.c * self._ends[-1]) ** 2
            if exponent + 1 > cap:
                break
            size = 1 << exponent
            self._sizes.append(size)
            self._ends.append(self._ends[-1] + size)
        logger.debug(f"corollary2 weights: {len(self._sizes)} blocks materialized (c={self.c})")

    @property
    def blocks(self) -> int:
        return len(self._sizes)

    def block_size(self, l: int) -> int:
        if not 1 <= l <= len(self._sizes):
            raise UnrepresentableError(f"block {l} of corollary2 weights is not representable")
        return self._sizes[l - 1]

    def block_of(self, j: int) -> int:
        """Block index l containing weight index j."""
        self._check_index(j)
        for l, end in enumerate(self._ends, start=1):
            if j <= end:
                return l
        raise UnrepresentableError(
            f"weight index beyond the last representable block (c={self.c})",
            {"last_block_end_bits": self._ends[-1].bit_length()},
        )

    def block_weight(self, l: int) -> Fraction:
        return (self.s ** (l - 1) - self.s ** l) / self.block_size(l)

    def weight(self, j: int) -> Fraction:
        return self.block_weight(self.block_of(j))

    def tail_sum(self, k: int) -> Fraction:
        if k <= 1:
            return Fraction(1)
        l = self.block_of(k)
        end = self._ends[l - 1]
        return (end - k + 1) * self.block_weight(l) + self.s ** l

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "params": {"c": self.c}}


def create_weights(descriptor: Dict[str, Any]) -> WeightFamily:
    """
    Build a weight family from its JSON descriptor.

    Args:
        descriptor: {"kind": ..., "params": {...}}

    Returns:
        WeightFamily instance

    Raises:
        ConfigError: Unknown kind or missing parameter
    """
    kind = descriptor.get("kind")
    params = descriptor.get("params", {}) or {}
    try:
        if kind == "geometric":
            scale = params.get("scale")
            return GeometricWeights(
                to_q(params["ratio"]), to_q(scale) if scale is not None else None
            )
        elif kind == "corollary1":
            return Corollary1Weights()
        elif kind == "corollary2":
            return Corollary2Weights(int(params["c"]))
        elif kind == "explicit":
            tail_ratio = params.get("tail_ratio")
            return ExplicitFiniteWeights(
                [to_q(v) for v in params["values"]],
                to_q(params.get("tail_mass", 0)),
                to_q(tail_ratio) if tail_ratio is not None else None,
            )
    except KeyError as e:
        raise ConfigError(f"Weight family '{kind}' is missing parameter {e}") from e
    raise ConfigError(
        f"Unknown weight family: {kind!r}",
        {"supported": ["geometric", "corollary1", "corollary2", "explicit"]},
    )
