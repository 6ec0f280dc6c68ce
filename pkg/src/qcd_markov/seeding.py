"""Reproducible random streams and deterministic parallel maps.

Every trial owns a generator derived from ``(master_seed, purpose, *indices)``
so results do not depend on scheduling, chunking, or on how many other grid
points or trials share the run.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def derive_rng(master_seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Independent generator for one labelled unit of work."""
    ss = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=(purpose_key(purpose), *map(int, indices))
    )
    return np.random.default_rng(ss)


def thread_count() -> int:
    """Worker cap from ``QCD_THREADS``; defaults to the CPU count."""
    raw = os.environ.get("QCD_THREADS", "")
    if raw.strip():
        return max(1, int(raw))
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """``list(map(fn, items))``, possibly threaded, always in input order."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunked(n: int, size: int) -> list[range]:
    return [range(lo, min(lo + size, n)) for lo in range(0, n, size)]


def concat(parts: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate(parts) if parts else np.empty(0)
