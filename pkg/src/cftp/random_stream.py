"""Counter-based uniform streams indexed by signed positions.

Each stream is a Philox generator keyed by (master seed, replicate index,
purpose tag). Position j lives in block j // block_size; a block is produced
by setting the Philox counter to the block index, so any position can be
read in O(1) and independently of previous queries.
"""

import hashlib
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict

import numpy as np

from src.errors import ParameterError

UNIFORM_BITS = 53
_MASK64 = (1 << 64) - 1
_SCALE = 2.0 ** -UNIFORM_BITS


def purpose_hash(purpose: str) -> int:
    """Stable 32-bit hash of a purpose tag."""
    return int.from_bytes(hashlib.blake2b(purpose.encode("utf-8"), digest_size=4).digest(), "little")


@dataclass(frozen=True)
class StreamId:
    replicate: int
    purpose: str

    def to_dict(self) -> Dict[str, object]:
        return {"replicate": self.replicate, "purpose": self.purpose}


class RandomnessStream:
    """
    Bi-infinite i.i.d. uniform sequence (U_j), j in Z.

    Args:
        master_seed: 64-bit master seed
        replicate: Replicate index (nonnegative)
        purpose: Purpose tag separating streams used for different jobs
        block_size: Uniforms per Philox block
        cache_blocks: Number of blocks kept in memory
    """

    def __init__(
        self,
        master_seed: int,
        replicate: int = 0,
        purpose: str = "main",
        block_size: int = 4096,
        cache_blocks: int = 64,
    ):
        if not 0 <= master_seed <= _MASK64:
            raise ParameterError(f"master seed must be a 64-bit unsigned integer, got {master_seed}")
        if replicate < 0:
            raise ParameterError(f"replicate index must be nonnegative, got {replicate}")
        self.master_seed = master_seed
        self.stream_id = StreamId(replicate, purpose)
        self.block_size = block_size
        self._cache_blocks = cache_blocks
        seed_seq = np.random.SeedSequence(
            entropy=master_seed, spawn_key=(replicate, purpose_hash(purpose))
        )
        self._key = seed_seq.generate_state(2, dtype=np.uint64)
        self._blocks: "OrderedDict[int, np.ndarray]" = OrderedDict()

    def _block(self, index: int) -> np.ndarray:
        block = self._blocks.get(index)
        if block is not None:
            self._blocks.move_to_end(index)
            return block
        counter = np.array([0, index & _MASK64, 0, 0], dtype=np.uint64)
        bitgen = np.random.Philox(key=self._key, counter=counter)
        block = bitgen.random_raw(self.block_size) >> np.uint64(64 - UNIFORM_BITS)
        self._blocks[index] = block
        if len(self._blocks) > self._cache_blocks:
            self._blocks.popitem(last=False)
        return block

    def raw_at(self, j: int) -> int:
        """53-bit integer n with U_j = n / 2**53."""
        return int(self._block(j // self.block_size)[j % self.block_size])

    def uniform_at(self, j: int) -> float:
        return self.raw_at(j) * _SCALE

    def raw_range(self, lo: int, hi: int) -> np.ndarray:
        """53-bit integers for positions lo..hi inclusive (empty when hi < lo)."""
        if hi < lo:
            return np.empty(0, dtype=np.uint64)
        B = self.block_size
        first, last = lo // B, hi // B
        parts = []
        for index in range(first, last + 1):
            block = self._block(index)
            start = lo - index * B if index == first else 0
            stop = hi - index * B + 1 if index == last else B
            parts.append(block[start:stop])
        return np.concatenate(parts)

    def describe(self) -> Dict[str, object]:
        return {"master_seed": self.master_seed, **self.stream_id.to_dict()}


def uniform_at(stream: RandomnessStream, j: int) -> float:
    """U_j of the stream, deterministic and order-independent."""
    return stream.uniform_at(j)
