"""Reproducible random streams.

Every stream is a Philox counter-based generator keyed by a user seed and a
path of names, e.g. ``stream(seed, "signal", 3)``.  Chunked generation with one
substream per chunk makes results independent of how many threads consume
the chunks.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

#: samples per independently seeded chunk
CHUNK_SIZE = 1 << 16

T = TypeVar("T")


def _key_word(key: str | int) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("stream keys must be non-negative")
        return int(key)
    digest = hashlib.sha256(str(key).encode()).digest()
    return int.from_bytes(digest[:4], "little")


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed: int, *keys: str | int) -> np.random.Generator:
    """Return the generator for ``seed`` and the named substream ``keys``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(_key_word(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def chunk_bounds(n: int, chunk_size: int = CHUNK_SIZE) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk_size, n)) for lo in range(0, n, chunk_size)]


def ordered_map(fn: Callable[..., T], items: Sequence, workers: int = 1) -> list[T]:
    """``map`` over ``items`` with up to ``workers`` threads, results in input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
