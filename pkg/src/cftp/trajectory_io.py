"""Trajectory dumps: CSV (index,symbol) and bit-packed binary.

Binary layout: header-less, one bit per symbol, +1 -> 1, -1 -> 0, bits
packed little-endian within each byte (symbol i is bit i % 8 of byte i // 8).
The length is not stored; it is recorded in the run's JSON summary.
"""

import csv
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from src.kernels.symbols import as_symbols
from src.utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]


def write_csv(path: PathLike, start: int, symbols: Sequence[int]) -> Path:
    """Write rows (index, symbol) starting at time ``start``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["index", "symbol"])
        for offset, s in enumerate(as_symbols(symbols)):
            writer.writerow([start + offset, s])
    logger.debug(f"Wrote {len(symbols)} symbols to {path}")
    return path


def read_csv(path: PathLike) -> Tuple[int, List[int]]:
    """Returns (start index, symbols)."""
    with open(path, "r", newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        return 0, []
    return int(rows[0]["index"]), list(as_symbols(int(r["symbol"]) for r in rows))


def pack_symbols(symbols: Sequence[int]) -> bytes:
    bits = np.asarray(as_symbols(symbols), dtype=np.int8) > 0
    return np.packbits(bits, bitorder="little").tobytes()


def unpack_symbols(data: bytes, length: int) -> List[int]:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=length, bitorder="little")
    return [1 if b else -1 for b in bits.tolist()]


def write_packed(path: PathLike, symbols: Sequence[int]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(pack_symbols(symbols))
    logger.debug(f"Wrote {len(symbols)} packed symbols to {path}")
    return path


def read_packed(path: PathLike, length: int) -> List[int]:
    return unpack_symbols(Path(path).read_bytes(), length)
