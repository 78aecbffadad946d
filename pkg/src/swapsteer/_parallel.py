from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "SWAPSTEER_THREADS"


def worker_count() -> int:
    cores = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return cores
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Ordered map; results come back in input order whatever the completion order."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
