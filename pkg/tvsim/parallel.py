"""Order-preserving thread fan-out used for per-sample work."""
# tvsim/parallel.py
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[int, T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """
    Applies fn(index, item) to every item and returns results in input order.

    numpy releases the GIL inside BLAS calls, so threads overlap the matrix
    products. Reductions happen in the caller over the ordered list, which
    keeps results independent of the thread count.
    """
    if threads <= 1 or len(items) < 2:
        return [fn(i, item) for i, item in enumerate(items)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(len(items)), items))
