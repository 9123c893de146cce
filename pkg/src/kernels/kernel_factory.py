"""Factory for building kernels and model parameters from JSON descriptors."""

from typing import Any, Dict, Union

from src.errors import ConfigError
from src.kernels.base_kernel import BaseKernel
from src.kernels.bk_kernels import FullBK, PrimedMixedKernel, TruncatedKernel, Variant
from src.kernels.orders import create_orders
from src.kernels.params import ModelParams
from src.kernels.symbols import WindowConvention
from src.kernels.table_kernel import TableKernel
from src.kernels.weights import create_weights
from src.utils.logger import get_logger
from src.utils.rationals import to_q

logger = get_logger(__name__)

SUPPORTED_VARIANTS = ("full", "lower", "upper", "mixed", "mixed_prime", "table")


def create_params(descriptor: Dict[str, Any]) -> ModelParams:
    """
    Build ModelParams from {epsilon, weights, orders, convention}.

    Raises:
        ConfigError: Missing or malformed fields
    """
    try:
        epsilon = to_q(descriptor["epsilon"])
        weights = create_weights(descriptor["weights"])
        orders = create_orders(descriptor["orders"])
    except KeyError as e:
        raise ConfigError(f"Model parameters are missing field {e}") from e
    convention = descriptor.get("convention", WindowConvention.RECENT.value)
    try:
        convention = WindowConvention(convention)
    except ValueError as e:
        raise ConfigError(
            f"Unknown window convention: {convention!r}",
            {"supported": [c.value for c in WindowConvention]},
        ) from e
    return ModelParams(epsilon, weights, orders, convention)


def create_kernel(descriptor: Dict[str, Any]) -> Union[BaseKernel, FullBK]:
    """
    Factory function to create a kernel from its JSON descriptor.

    Args:
        descriptor: {"variant": ..., "epsilon": "num/den", "weights": {...},
            "orders": [...] or {...}, "k": int, "l": int} or, for tables,
            {"variant": "table", "order": M, "values": ["num/den", ...]}.
            Mixed-prime kernels accept "partition": "primed".

    Returns:
        Kernel instance (FullBK for the un-truncated model)

    Example:
        kernel = create_kernel({
            "variant": "lower", "k": 1, "epsilon": "1/4",
            "weights": {"kind": "corollary1"}, "orders": [1],
        })
    """
    variant = descriptor.get("variant")
    logger.debug(f"Creating kernel: variant={variant!r}")

    if variant == "table":
        try:
            return TableKernel.from_strings(int(descriptor["order"]), descriptor["values"])
        except KeyError as e:
            raise ConfigError(f"Table kernel is missing field {e}") from e

    if variant not in SUPPORTED_VARIANTS:
        raise ConfigError(f"Unknown kernel variant: {variant!r}", {"supported": list(SUPPORTED_VARIANTS)})

    params = create_params(descriptor)
    if variant == "full":
        return FullBK(params)

    try:
        k = int(descriptor["k"])
    except KeyError as e:
        raise ConfigError(f"Kernel variant '{variant}' needs field 'k'") from e
    l = descriptor.get("l")
    l = int(l) if l is not None else None

    if variant == "mixed_prime" and descriptor.get("partition") == "primed":
        if l is None:
            raise ConfigError("primed mixed kernel needs field 'l'")
        return PrimedMixedKernel(params, k, l - 1)
    return TruncatedKernel(params, Variant(variant), k, l)
