"""Replicate fan-out with a frozen replicate-to-stream mapping.

Replicate ``i`` of an experiment always draws from
``RngStream(master_seed, stream_index=i)``.  Results are returned in
replicate order, so any reduction over them is independent of the
number of workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, Sequence, TypeVar

from .rand_kit import RngStream

T = TypeVar("T")


def _run_chunk(fn: Callable[[RngStream], T], master_seed: int, indices: Sequence[int]) -> list[T]:
    return [fn(RngStream(master_seed, i)) for i in indices]


def run_replicates(
    fn: Callable[[RngStream], T],
    n: int,
    master_seed: int,
    workers: int = 1,
    start: int = 0,
) -> list[T]:
    """``[fn(RngStream(master_seed, i)) for i in range(start, start + n)]``.

    ``fn`` must be picklable (a module-level function or a ``partial`` of
    one) when ``workers > 1``.
    """
    indices = range(start, start + n)
    if workers <= 1 or n < 2:
        return _run_chunk(fn, master_seed, indices)
    n_chunks = min(n, workers * 4)
    bounds = [start + n * k // n_chunks for k in range(n_chunks + 1)]
    chunks = [range(a, b) for a, b in zip(bounds, bounds[1:])]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(partial(_run_chunk, fn, master_seed), chunks)
        return [x for part in parts for x in part]


def run_blocks(
    fn: Callable[[RngStream, int], T],
    n: int,
    block: int,
    master_seed: int,
    workers: int = 1,
) -> list[T]:
    """Vectorized variant: block ``b`` of ``block`` replicates uses stream ``b``.

    ``fn(rng, size)`` returns the results of ``size`` replicates at once.
    """
    sizes = [min(block, n - k) for k in range(0, n, block)]
    outs = run_replicates(_BlockCall(fn, sizes), len(sizes), master_seed, workers)
    return outs


class _BlockCall:
    def __init__(self, fn, sizes):
        self.fn = fn
        self.sizes = sizes

    def __call__(self, rng: RngStream):
        return self.fn(rng, self.sizes[rng.stream_index])
