"""Small shared helpers for the orchestration layer."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(requested: int | None) -> int:
    """Worker count for fan-out: RADEVAL_THREADS wins, else the request, else 1."""
    env = os.environ.get("RADEVAL_THREADS")
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"RADEVAL_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise ValueError("RADEVAL_THREADS must be >= 1")
        return value
    if requested is None:
        return 1
    if requested < 1:
        raise ValueError("threads must be >= 1")
    return requested


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int) -> list[R]:
    """Order-preserving map; results never depend on worker count."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
