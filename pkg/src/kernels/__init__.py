"""Alphabet, weight families, BK kernels, table kernels and interval partitions."""

from src.kernels.bk_kernels import (
    FullBK,
    PrimedMixedKernel,
    TruncatedKernel,
    Variant,
    bk_eval_bounded,
    build_partition,
    build_primed_partition,
    lower,
    majority_eval,
    mixed,
    mixed_prime,
    upper,
)
from src.kernels.kernel_factory import create_kernel, create_params
from src.kernels.params import ModelParams
from src.kernels.symbols import Context, SpinSymbol, WindowConvention
from src.kernels.table_kernel import TableKernel, check_attractive, inf_truncation, sup_truncation

__all__ = [
    "Context",
    "FullBK",
    "ModelParams",
    "PrimedMixedKernel",
    "SpinSymbol",
    "TableKernel",
    "TruncatedKernel",
    "Variant",
    "WindowConvention",
    "bk_eval_bounded",
    "build_partition",
    "build_primed_partition",
    "check_attractive",
    "create_kernel",
    "create_params",
    "inf_truncation",
    "lower",
    "majority_eval",
    "mixed",
    "mixed_prime",
    "sup_truncation",
    "upper",
]
