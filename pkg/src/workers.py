"""Replicate pool: maps a per-replicate function over indices, in index order."""

import json
import os
from dataclasses import dataclass
from functools import lru_cache
from multiprocessing import Pool
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar, Union

from src.cftp.random_stream import RandomnessStream
from src.kernels.base_kernel import BaseKernel
from src.kernels.bk_kernels import FullBK
from src.kernels.kernel_factory import create_kernel
from src.utils.config_loader import default_settings
from src.utils.logger import get_logger

logger = get_logger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class StreamFactory:
    """Builds the stream of replicate i for one job (seed + purpose tag)."""

    seed: int
    purpose: str
    block_size: int = 4096

    def __call__(self, replicate: int) -> RandomnessStream:
        return RandomnessStream(self.seed, replicate, self.purpose, self.block_size)

    def describe(self) -> Dict[str, Any]:
        return {"seed": self.seed, "purpose": self.purpose}


def stream_factory(seed: int, purpose: str) -> StreamFactory:
    return StreamFactory(seed, purpose, default_settings().cftp.block_size)


def kernel_key(kernel: Union[BaseKernel, FullBK]) -> str:
    """Canonical JSON descriptor; the picklable handle workers rebuild kernels from."""
    return json.dumps(kernel.describe(), sort_keys=True)


@lru_cache(maxsize=64)
def kernel_from_key(key: str) -> Union[BaseKernel, FullBK]:
    return create_kernel(json.loads(key))


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit count, else runtime.workers; 0 means all available cores."""
    if workers is None:
        workers = default_settings().runtime.workers
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


class ReplicatePool:
    """
    Runs fn(0), ..., fn(n-1) in-process or over multiprocessing.Pool.

    Results come back in index order, so reductions over them do not depend
    on the worker count. fn must be picklable (a module-level function or a
    functools.partial of one).
    """

    def __init__(self, workers: Optional[int] = None):
        self.workers = resolve_workers(workers)

    def map(self, fn: Callable[[int], T], n: int, chunksize: Optional[int] = None) -> List[T]:
        return self.map_items(fn, range(n), chunksize)

    def map_items(self, fn: Callable[[Any], T], items: Sequence[Any], chunksize: Optional[int] = None) -> List[T]:
        items = list(items)
        if self.workers == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        if chunksize is None:
            chunksize = max(1, len(items) // (4 * self.workers))
        logger.debug(f"Mapping {len(items)} replicates over {self.workers} workers (chunksize {chunksize})")
        with Pool(processes=self.workers) as pool:
            return pool.map(fn, items, chunksize=chunksize)
