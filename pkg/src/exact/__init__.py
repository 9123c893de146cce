"""Exact stationary laws, entropy, Ruelle operator and couplings of finite-order kernels."""

from src.exact.coupling import (
    CoupledKernel,
    coupled_stationary,
    exact_dbar_attractive,
    hulse_coupling,
    hulse_stationary,
    maximal_coupling_check,
    pair_forward,
    truncation_ledger,
)
from src.exact.transfer import (
    StateDistribution,
    entropy,
    marginal_plus,
    ruelle_apply,
    ruelle_iterate,
    stationary,
)

__all__ = [
    "CoupledKernel",
    "StateDistribution",
    "coupled_stationary",
    "entropy",
    "exact_dbar_attractive",
    "hulse_coupling",
    "hulse_stationary",
    "marginal_plus",
    "maximal_coupling_check",
    "pair_forward",
    "ruelle_apply",
    "ruelle_iterate",
    "stationary",
    "truncation_ledger",
]
