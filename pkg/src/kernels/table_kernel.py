"""Table kernels, attractivity check and sup/inf Markov truncations."""

from fractions import Fraction
from typing import Any, Dict, Sequence

import numpy as np

from src.errors import ParameterError, PreconditionError
from src.kernels.base_kernel import BaseKernel
from src.kernels.partition import ThresholdRule
from src.utils.rationals import qstr, to_q


class TableKernel(BaseKernel):
    """Order-M kernel stored as P(+1 | context) for all 2**M contexts."""

    def __init__(self, order: int, values: Sequence[Fraction]):
        if order < 0:
            raise ParameterError(f"table order must be >= 0, got {order}")
        values = tuple(Fraction(v) for v in values)
        if len(values) != 1 << order:
            raise ParameterError(f"table of order {order} needs {1 << order} entries, got {len(values)}")
        for bits, p in enumerate(values):
            if not 0 <= p <= 1:
                raise ParameterError(f"table entry {bits} = {p} is not a probability")
        self.order = order
        self.values = values

    @classmethod
    def from_strings(cls, order: int, values: Sequence[Any]) -> "TableKernel":
        return cls(order, [to_q(v) for v in values])

    @property
    def label(self) -> str:
        return f"table({self.order})"

    def prob_plus(self, bits: int) -> Fraction:
        return self.values[bits]

    def to_table(self, order: int = None) -> "TableKernel":
        if order is None or order == self.order:
            return self
        return super().to_table(order)

    @property
    def strictly_positive(self) -> bool:
        return all(0 < p < 1 for p in self.values)

    def update_rule(self) -> ThresholdRule:
        return ThresholdRule(self.order, self.values)

    def describe(self) -> Dict[str, Any]:
        return {"variant": "table", "order": self.order, "values": [qstr(v) for v in self.values]}

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TableKernel) and (self.order, self.values) == (other.order, other.values)

    def __hash__(self) -> int:
        return hash((self.order, self.values))


def check_attractive(g: TableKernel) -> bool:
    """
    True iff P(+1 | context) is nondecreasing under the coordinatewise order.

    Single-coordinate flips generate the order, so those are the only pairs checked.
    """
    values = g.values
    for bits in range(1 << g.order):
        for i in range(g.order):
            flag = 1 << i
            if not bits & flag and values[bits] > values[bits | flag]:
                return False
    return True


def _truncate(g: TableKernel, j: int, pick) -> TableKernel:
    if not 0 <= j < g.order:
        raise ParameterError(f"truncation order must satisfy 0 <= j < {g.order}, got {j}")
    if not g.strictly_positive:
        raise PreconditionError("truncations are defined for strictly positive tables")
    completions = 1 << (g.order - j)
    values = []
    for prefix in range(1 << j):
        values.append(pick(g.values[prefix | (t << j)] for t in range(completions)))
    return TableKernel(j, values)


def sup_truncation(g: TableKernel, j: int) -> TableKernel:
    """g_j(+1 | c) = max of g over every completion of the order-j context c."""
    return _truncate(g, j, max)


def inf_truncation(g: TableKernel, j: int) -> TableKernel:
    """g'_j(+1 | c) = min of g over every completion of c."""
    return _truncate(g, j, min)


def dominates(a: BaseKernel, b: BaseKernel) -> bool:
    """True iff P_a(+1 | x) >= P_b(+1 | x) for every context at the common order."""
    order = max(a.order, b.order)
    ta, tb = a.to_table(order), b.to_table(order)
    return all(pa >= pb for pa, pb in zip(ta.values, tb.values))


def random_attractive_table(order: int, rng: np.random.Generator, scale: int = 100) -> TableKernel:
    """
    Random strictly positive attractive table of the given order.

    P(+1 | x) = (a + sum_i w_i x_i + v x_0 x_1) / D over the context bits x_i,
    with positive integer a, w_i, v and a positive slack in D, so every entry
    lies in (0, 1) and grows with each bit.
    """
    if order < 0:
        raise ParameterError(f"table order must be >= 0, got {order}")
    draws = [int(x) for x in rng.integers(1, scale, size=order + 3)]
    base, interaction, slack = draws[0], draws[1], draws[2]
    slopes = draws[3:]
    if order < 2:
        interaction = 0
    total = base + sum(slopes) + interaction + slack
    values = []
    for bits in range(1 << order):
        numerator = base + sum(w for i, w in enumerate(slopes) if bits >> i & 1)
        if bits & 3 == 3:
            numerator += interaction
        values.append(Fraction(numerator, total))
    return TableKernel(order, values)
