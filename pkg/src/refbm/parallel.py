"""Replicate-parallel chunk mapping with order-independent reduction.

Workers receive (chunk_index, chunk_size); partial results are returned in
chunk order no matter which thread finished first, so outputs are a pure
function of (seed, config).
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")


def map_chunks(worker: Callable[[int, int], T], sizes: list[int],
               threads: int = 1) -> list[T]:
    if threads <= 1 or len(sizes) <= 1:
        return [worker(i, n) for i, n in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, i, n) for i, n in enumerate(sizes)]
        return [f.result() for f in futures]
