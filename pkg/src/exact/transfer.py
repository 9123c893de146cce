"""Stationary laws of finite-order kernels through their context chains.

A kernel of order m is lifted to the Markov chain on contexts of order
M = max(m, 1); each state has two successors. Three solvers are used
depending on the number of states:

* exact rational Gaussian elimination (``exact.rational_cap_states``)
* dense float solve with numpy (``exact.dense_cap_states``)
* sparse power iteration with scipy (``exact.sparse_cap_states``)
"""

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from src.errors import NumericError, ParameterError, PreconditionError, StateSpaceCapError
from src.kernels.base_kernel import BaseKernel
from src.kernels.bk_kernels import FullBK
from src.kernels.symbols import bits_to_string, mask, push
from src.utils.config_loader import ExactSettings, default_settings
from src.utils.logger import get_logger
from src.utils.rationals import qstr

logger = get_logger(__name__)

Number = Union[Fraction, float]
Rows = List[List[Tuple[int, Fraction]]]


class SolveMethod:
    RATIONAL = "rational"
    DENSE = "dense"
    POWER = "power"


# ============================================================================
# Generic stationary solvers over row lists
# ============================================================================

def _solve_rational(rows: Rows) -> List[Fraction]:
    """pi P = pi, sum(pi) = 1 by Gaussian elimination over the rationals."""
    n = len(rows)
    # A = P^T - I with the last equation replaced by normalization
    A = [[Fraction(0)] * n + [Fraction(0)] for _ in range(n)]
    for i, row in enumerate(rows):
        for j, p in row:
            A[j][i] += p
    for i in range(n):
        A[i][i] -= 1
    A[n - 1] = [Fraction(1)] * n + [Fraction(1)]

    for col in range(n):
        pivot = next((r for r in range(col, n) if A[r][col] != 0), None)
        if pivot is None:
            raise NumericError("singular stationary system", {"column": col})
        A[col], A[pivot] = A[pivot], A[col]
        lead = A[col][col]
        pivot_row = [v / lead for v in A[col]]
        A[col] = pivot_row
        for r in range(n):
            if r != col and A[r][col] != 0:
                factor = A[r][col]
                A[r] = [a - factor * b for a, b in zip(A[r], pivot_row)]
    return [A[i][n] for i in range(n)]


def _sparse_matrix(rows: Rows) -> sp.csr_matrix:
    n = len(rows)
    src, dst, val = [], [], []
    for i, row in enumerate(rows):
        for j, p in row:
            src.append(i)
            dst.append(j)
            val.append(float(p))
    return sp.csr_matrix((val, (src, dst)), shape=(n, n))


def _residual(P: sp.csr_matrix, pi: np.ndarray) -> float:
    return float(np.abs(P.T @ pi - pi).sum())


def _solve_dense(P: sp.csr_matrix) -> np.ndarray:
    n = P.shape[0]
    A = P.T.toarray() - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _solve_power(P: sp.csr_matrix, tolerance: float, max_iterations: int) -> np.ndarray:
    n = P.shape[0]
    PT = P.T.tocsr()
    pi = np.full(n, 1.0 / n)
    for iteration in range(1, max_iterations + 1):
        nxt = PT @ pi
        nxt /= nxt.sum()
        delta = float(np.abs(nxt - pi).sum())
        pi = nxt
        if delta < tolerance:
            logger.debug(f"Power iteration converged after {iteration} steps (delta={delta:.3e})")
            return pi
    raise NumericError(
        f"power iteration did not converge in {max_iterations} steps",
        {"states": n, "tolerance": tolerance},
    )


def solve_rows(rows: Rows, settings: Optional[ExactSettings] = None) -> Tuple[Union[List[Fraction], np.ndarray], float, str]:
    """
    Stationary vector of the chain given by transition rows.

    Returns:
        (weights, residual, method); weights are Fractions for the rational solver

    Raises:
        StateSpaceCapError: More states than exact.sparse_cap_states
    """
    settings = settings or default_settings().exact
    n = len(rows)
    if n > settings.sparse_cap_states:
        raise StateSpaceCapError(
            f"{n} states exceed the exact-analysis cap of {settings.sparse_cap_states}",
            {"states": n, "cap": settings.sparse_cap_states},
        )
    if n <= settings.rational_cap_states:
        pi = _solve_rational(rows)
        return pi, 0.0, SolveMethod.RATIONAL
    P = _sparse_matrix(rows)
    if n <= settings.dense_cap_states:
        pi = _solve_dense(P)
        method = SolveMethod.DENSE
    else:
        pi = _solve_power(P, settings.tolerance, settings.max_iterations)
        method = SolveMethod.POWER
    return pi, _residual(P, pi), method


# ============================================================================
# Single-kernel chains
# ============================================================================

def chain_order(kernel: BaseKernel) -> int:
    """Order of the context chain a kernel is lifted to."""
    return max(kernel.order, 1)


def _require_finite(kernel: Any) -> BaseKernel:
    if isinstance(kernel, FullBK):
        raise PreconditionError("exact analysis needs a finite-order kernel", {"kernel": kernel.label})
    return kernel


def _check_states(order: int, settings: ExactSettings) -> None:
    if order > 62 or (1 << order) > settings.sparse_cap_states:
        raise StateSpaceCapError(
            f"order {order} gives 2^{order} states, above the cap of {settings.sparse_cap_states}",
            {"order": order, "cap": settings.sparse_cap_states},
        )


def plus_probabilities(kernel: BaseKernel, order: int) -> List[Fraction]:
    """P(+1 | x) for every context x of the given order."""
    own = mask(kernel.order)
    cache: Dict[int, Fraction] = {}
    values = []
    for bits in range(1 << order):
        key = bits & own
        if key not in cache:
            cache[key] = kernel.prob_plus(key)
        values.append(cache[key])
    return values


def transition_rows(kernel: BaseKernel, order: int) -> Rows:
    rows = []
    for bits, p in enumerate(plus_probabilities(kernel, order)):
        rows.append([(push(bits, 1, order), p), (push(bits, 0, order), 1 - p)])
    return rows


def transition_matrix(kernel: BaseKernel, order: Optional[int] = None) -> sp.csr_matrix:
    """Sparse float transition matrix of the context chain."""
    order = chain_order(kernel) if order is None else order
    return _sparse_matrix(transition_rows(kernel, order))


@dataclass
class StateDistribution:
    """
    Stationary weights over all contexts of ``order``.

    Attributes:
        order: Context order of the chain
        weights: Fractions (rational solve) or a float array
        exact: True iff weights are exact rationals
        residual: ||pi P - pi||_1 (0 for exact solves)
        method: Solver used
    """

    order: int
    weights: Union[List[Fraction], np.ndarray]
    exact: bool
    residual: float
    method: str

    @property
    def size(self) -> int:
        return 1 << self.order

    def weight(self, bits: int) -> Number:
        return self.weights[bits]

    def as_array(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights]) if self.exact else np.asarray(self.weights)

    def marginal_plus(self) -> Number:
        return marginal_plus(self)

    def to_rows(self) -> List[Tuple[str, str]]:
        rows = []
        for bits, w in enumerate(self.weights):
            rows.append((bits_to_string(bits, self.order), qstr(w) if self.exact else repr(float(w))))
        return rows

    def summary(self) -> Dict[str, Any]:
        plus = self.marginal_plus()
        return {
            "order": self.order,
            "states": self.size,
            "method": self.method,
            "exact": self.exact,
            "residual": self.residual,
            "marginal_plus": qstr(plus) if self.exact else float(plus),
            "marginal_plus_float": float(plus),
        }


def stationary(
    kernel: BaseKernel,
    settings: Optional[ExactSettings] = None,
    order: Optional[int] = None,
) -> StateDistribution:
    """
    Stationary distribution of a finite-order kernel's context chain.

    Args:
        kernel: Finite-order kernel
        settings: Exact-solver caps (default: process settings)
        order: Context order of the lifted chain; at least the kernel order

    Raises:
        ParameterError: order below the kernel order
        PreconditionError: Infinite-order kernel
        StateSpaceCapError: Too many contexts
    """
    kernel = _require_finite(kernel)
    settings = settings or default_settings().exact
    if order is None:
        order = chain_order(kernel)
    elif order < chain_order(kernel):
        raise ParameterError(f"context order {order} is below the kernel order {kernel.order}")
    _check_states(order, settings)
    logger.debug(f"Solving stationary law of {kernel.label} on {1 << order} contexts")
    weights, residual, method = solve_rows(transition_rows(kernel, order), settings)
    exact = method == SolveMethod.RATIONAL
    if not exact and residual > settings.tolerance:
        raise NumericError(
            f"stationarity residual {residual:.3e} above tolerance {settings.tolerance:.1e}",
            {"kernel": kernel.label, "method": method},
        )
    return StateDistribution(order, weights, exact, residual, method)


def marginal_plus(dist: StateDistribution) -> Number:
    """mu(x_0 = +1): total weight of contexts whose most recent symbol is +1."""
    if dist.exact:
        return sum((w for b, w in enumerate(dist.weights) if b & 1), Fraction(0))
    arr = np.asarray(dist.weights)
    return float(arr[1::2].sum())


PAIR_KEYS = ("++", "+-", "-+", "--")


def pair_marginals(dist: StateDistribution) -> Dict[str, Number]:
    """
    mu(x_{-1} = a, x_0 = b) keyed "ab" over a, b in {+, -}.

    Raises:
        ParameterError: dist.order < 2
    """
    if dist.order < 2:
        raise ParameterError(f"pair marginals need contexts of order >= 2, got {dist.order}")
    totals: Dict[str, Number] = {key: Fraction(0) if dist.exact else 0.0 for key in PAIR_KEYS}
    for bits, w in enumerate(dist.weights):
        key = ("+" if bits & 2 else "-") + ("+" if bits & 1 else "-")
        totals[key] += w if dist.exact else float(w)
    return totals


def entropy(kernel: BaseKernel, dist: StateDistribution) -> float:
    """
    -sum_x pi(x) sum_a P(a|x) ln P(a|x), in nats.

    Raises:
        PreconditionError: A kernel entry equal to 0 or 1
    """
    values = plus_probabilities(kernel, dist.order)
    if any(v <= 0 or v >= 1 for v in values):
        raise PreconditionError("entropy needs a strictly positive kernel", {"kernel": kernel.label})
    p = np.array([float(v) for v in values])
    pi = dist.as_array()
    h = -(p * np.log(p) + (1 - p) * np.log1p(-p))
    return float(pi @ h)


def binary_entropy(p: Fraction) -> float:
    p = float(p)
    return -(p * math.log(p) + (1 - p) * math.log(1 - p))


# ============================================================================
# Ruelle operator
# ============================================================================

def ruelle_apply(g: BaseKernel, f: Sequence[float], order: Optional[int] = None) -> np.ndarray:
    """
    (L_g f)(x) = g(+1 x) f(+1 x truncated) + g(-1 x) f(-1 x truncated).

    Args:
        g: Kernel of order <= order
        f: Values over the 2**order contexts
        order: Context order of f (default: inferred from len(f))

    Raises:
        ParameterError: len(f) is not 2**order, or order < g.order
    """
    f = np.asarray(f, dtype=float)
    if order is None:
        order = max(int(f.size).bit_length() - 1, 0)
    if f.size != 1 << order:
        raise ParameterError(f"function has {f.size} values, expected {1 << order}")
    if order < g.order:
        raise ParameterError(f"function order {order} is below the kernel order {g.order}")
    p = np.array([float(v) for v in plus_probabilities(g, order)])
    bits = np.arange(1 << order)
    full = (1 << order) - 1
    up = ((bits << 1) | 1) & full
    down = (bits << 1) & full
    return p * f[up] + (1 - p) * f[down]


@dataclass
class RuelleLimits:
    """Values of L_g^n h at the all-plus and all-minus contexts."""

    plus: float
    minus: float
    iterations: int
    converged: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "plus": self.plus,
            "minus": self.minus,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def ruelle_iterate(
    g: BaseKernel,
    h: Sequence[float],
    order: Optional[int] = None,
    tolerance: float = 1e-12,
    max_iterations: int = 100_000,
) -> RuelleLimits:
    """Iterate L_g on h until the extremal-past values stop moving."""
    h = np.asarray(h, dtype=float)
    order = max(int(h.size).bit_length() - 1, 0) if order is None else order
    top = (1 << order) - 1
    f = h
    prev = (f[top], f[0])
    for n in range(1, max_iterations + 1):
        f = ruelle_apply(g, f, order)
        cur = (f[top], f[0])
        if abs(cur[0] - prev[0]) < tolerance and abs(cur[1] - prev[1]) < tolerance:
            return RuelleLimits(float(cur[0]), float(cur[1]), n, True)
        prev = cur
    logger.warning(f"Ruelle iteration stopped after {max_iterations} steps without converging")
    return RuelleLimits(float(prev[0]), float(prev[1]), max_iterations, False)


def indicator_plus(order: int) -> np.ndarray:
    """h(x) = 1 if x_0 = +1."""
    return (np.arange(1 << order) & 1).astype(float)


# ============================================================================
# Export
# ============================================================================

def write_distribution_csv(dist: StateDistribution, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["context", "weight"])
        writer.writerows(dist.to_rows())
    return path
