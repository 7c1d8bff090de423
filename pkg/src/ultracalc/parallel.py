"""Thread fan-out honouring ``UF_THREADS``.

Work is only ever split into independent per-cell pieces whose results are
written back in a fixed order, so output never depends on the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

ENV_VAR = "UF_THREADS"


def worker_count() -> int:
    raw = os.environ.get(ENV_VAR)
    if raw is None or raw.strip() == "":
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {n}")
    return n


def map_ordered(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunked_apply(fn: Callable[[np.ndarray], np.ndarray], data: np.ndarray, min_chunk: int = 4096) -> np.ndarray:
    """Apply an elementwise ``fn`` along the first axis of ``data`` in contiguous chunks."""
    n = data.shape[0]
    workers = worker_count()
    if workers <= 1 or n < 2 * min_chunk:
        return fn(data)
    bounds = np.linspace(0, n, min(workers, n // min_chunk) + 1).astype(int)
    pieces: Sequence[np.ndarray] = map_ordered(lambda ab: fn(data[ab[0]:ab[1]]), list(zip(bounds[:-1], bounds[1:])))
    return np.concatenate(pieces, axis=0)
