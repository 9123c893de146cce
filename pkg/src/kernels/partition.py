"""Interval partitions of [0, 1) and the update rules they compile to.

Uniforms are 53-bit integers n (u = n / 2**53). Cell boundaries are exact
rationals and are compared through integer thresholds, so ``u < bound`` is
decided without rounding.
"""

import bisect
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from src.errors import ParameterError
from src.kernels.symbols import WindowConvention, majority_bit
from src.utils.rationals import dyadic_threshold, qstr

UNIFORM_BITS = 53


class ActionKind(str, Enum):
    EMIT = "emit"
    MAJORITY = "majority"


@dataclass(frozen=True)
class Action:
    """What a cell does with the current context."""

    kind: ActionKind
    symbol: int = 0
    window: int = 0
    convention: WindowConvention = WindowConvention.RECENT

    @classmethod
    def emit(cls, symbol: int) -> "Action":
        return cls(kind=ActionKind.EMIT, symbol=symbol)

    @classmethod
    def majority(cls, window: int, convention: WindowConvention = WindowConvention.RECENT) -> "Action":
        return cls(kind=ActionKind.MAJORITY, window=window, convention=convention)

    def apply(self, bits: int) -> int:
        """Emitted symbol as a bit (1 for +1)."""
        if self.kind == ActionKind.EMIT:
            return 1 if self.symbol > 0 else 0
        return majority_bit(bits, self.window, self.convention)

    def __str__(self) -> str:
        if self.kind == ActionKind.EMIT:
            return f"Emit({self.symbol:+d})"
        return f"Majority({self.window})"


@dataclass(frozen=True)
class Cell:
    lo: Fraction
    hi: Fraction
    action: Action

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    def to_dict(self) -> Dict[str, Any]:
        return {"lo": qstr(self.lo), "hi": qstr(self.hi), "action": str(self.action)}


@dataclass(frozen=True)
class IntervalPartition:
    """
    Ordered half-open cells covering [0, 1), plus an optional lumped residual cell.

    Attributes:
        cells: Explicit cells, sorted
        residual: Last cell [lo, 1) holding every deeper index with one action
        order: Context length the actions read
        label: Kernel the partition realizes
    """

    cells: Tuple[Cell, ...]
    residual: Optional[Cell]
    order: int
    label: str = ""

    def __post_init__(self):
        everything = self.all_cells()
        position = Fraction(0)
        for cell in everything:
            if cell.lo != position or cell.hi < cell.lo:
                raise ParameterError(f"partition cells are not contiguous at {position}")
            position = cell.hi
        if position != 1:
            raise ParameterError(f"partition covers [0, {position}), expected [0, 1)")

    def all_cells(self) -> Tuple[Cell, ...]:
        return self.cells + ((self.residual,) if self.residual is not None else ())

    def total_length(self) -> Fraction:
        return sum((c.length for c in self.all_cells()), Fraction(0))

    def plus_measure(self, bits: int) -> Fraction:
        """Lebesgue measure of {u : the action at u emits +1 for this context}."""
        return sum((c.length for c in self.all_cells() if c.action.apply(bits)), Fraction(0))

    def cell_at(self, u: Fraction) -> Cell:
        for cell in self.all_cells():
            if cell.lo <= u < cell.hi:
                return cell
        raise ParameterError(f"u = {u} outside [0, 1)")

    def lengths(self) -> List[Fraction]:
        return [c.length for c in self.all_cells()]

    def compile(self) -> "PartitionRule":
        return PartitionRule(self)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "order": self.order,
            "cells": [c.to_dict() for c in self.cells],
            "residual": self.residual.to_dict() if self.residual is not None else None,
        }


def assemble(
    pieces: Sequence[Tuple[Fraction, Action]],
    residual: Optional[Tuple[Fraction, Action]],
    order: int,
    label: str,
) -> IntervalPartition:
    """Lay out (length, action) pieces from 0; zero-length pieces are dropped."""
    cells = []
    position = Fraction(0)
    for length, action in pieces:
        if length == 0:
            continue
        cells.append(Cell(position, position + length, action))
        position += length
    residual_cell = None
    if residual is not None and residual[0] != 0:
        residual_cell = Cell(position, position + residual[0], residual[1])
    return IntervalPartition(tuple(cells), residual_cell, order, label)


# ============================================================================
# Update rules
# ============================================================================

class UpdateRule(ABC):
    """Maps (context bits, 53-bit uniform) to the next symbol bit."""

    order: int

    @abstractmethod
    def step(self, bits: int, n: int) -> int:
        """Next symbol bit for uniform n / 2**53."""

    @abstractmethod
    def segments(self, bits: int) -> List[Tuple[Fraction, Fraction, int]]:
        """Exact (lo, hi, bit) pieces of [0, 1) for this context."""

    def base_threshold(self) -> Optional[int]:
        """
        If the rule's first cells emit regardless of context on [0, 2 eps),
        the dyadic threshold of 2 eps; else None.
        """
        return None


class PartitionRule(UpdateRule):
    """Update rule compiled from an IntervalPartition."""

    def __init__(self, partition: IntervalPartition):
        self.partition = partition
        self.order = partition.order
        cells = partition.all_cells()
        self._thresholds = [dyadic_threshold(c.hi, UNIFORM_BITS) for c in cells]
        self._actions = [c.action for c in cells]
        base = 0
        for cell in cells:
            if cell.action.kind != ActionKind.EMIT:
                break
            base += 1
        self._base_cells = base

    def step(self, bits: int, n: int) -> int:
        index = bisect.bisect_right(self._thresholds, n)
        return self._actions[index].apply(bits)

    def segments(self, bits: int) -> List[Tuple[Fraction, Fraction, int]]:
        return [(c.lo, c.hi, c.action.apply(bits)) for c in self.partition.all_cells()]

    def base_threshold(self) -> Optional[int]:
        if self._base_cells < 2:
            return None
        return self._thresholds[1]


class ThresholdRule(UpdateRule):
    """Emit +1 iff u >= 1 - P(+1 | context); monotone when the table is attractive."""

    def __init__(self, order: int, values: Sequence[Fraction]):
        self.order = order
        self._values = list(values)
        self._thresholds = [dyadic_threshold(1 - p, UNIFORM_BITS) for p in values]

    def step(self, bits: int, n: int) -> int:
        return 1 if n >= self._thresholds[bits] else 0

    def segments(self, bits: int) -> List[Tuple[Fraction, Fraction, int]]:
        cut = 1 - self._values[bits]
        pieces = []
        if cut > 0:
            pieces.append((Fraction(0), cut, 0))
        if cut < 1:
            pieces.append((cut, Fraction(1), 1))
        return pieces


def shared_uniform_pieces(
    rule_a: UpdateRule, bits_a: int, rule_b: UpdateRule, bits_b: int
) -> List[Tuple[Fraction, int, int]]:
    """
    Overlay two rules driven by the same uniform.

    Returns:
        List of (length, bit_a, bit_b) with lengths summing to 1
    """
    segs_a = rule_a.segments(bits_a)
    segs_b = rule_b.segments(bits_b)
    cuts = sorted({s[0] for s in segs_a} | {s[1] for s in segs_a} | {s[0] for s in segs_b} | {s[1] for s in segs_b})
    pieces: Dict[Tuple[int, int], Fraction] = {}
    ia = ib = 0
    for lo, hi in zip(cuts, cuts[1:]):
        while segs_a[ia][1] <= lo:
            ia += 1
        while segs_b[ib][1] <= lo:
            ib += 1
        key = (segs_a[ia][2], segs_b[ib][2])
        pieces[key] = pieces.get(key, Fraction(0)) + (hi - lo)
    return [(length, a, b) for (a, b), length in sorted(pieces.items())]
