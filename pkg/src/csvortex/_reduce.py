"""Deterministic reductions.

Every sum, dot product and quadrature in the package funnels through
``pairwise_sum`` so that results are bit-identical regardless of how many
worker threads are used: the array is always cut into the same fixed-size
blocks, each block is reduced with numpy's pairwise summation, and the
block partials are combined in a fixed order.  Worker count only changes
which thread evaluates a block, never the arithmetic tree.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_BLOCK = 1 << 13

_WORKERS_ENV = "CSVORTEX_WORKERS"

_executor: ThreadPoolExecutor | None = None
_executor_workers = 0


def worker_count() -> int:
    """Worker count from the environment (default 1)."""
    raw = os.environ.get(_WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{_WORKERS_ENV} must be an integer, got {raw!r}")
    return max(1, n)


def _get_executor() -> ThreadPoolExecutor | None:
    global _executor, _executor_workers
    n = worker_count()
    if n <= 1:
        return None
    if _executor is None or _executor_workers != n:
        if _executor is not None:
            _executor.shutdown(wait=False)
        _executor = ThreadPoolExecutor(max_workers=n)
        _executor_workers = n
    return _executor


def pairwise_sum(values: np.ndarray) -> float:
    """Sum with a worker-count-independent pairwise tree."""
    flat = np.ravel(values)
    n = flat.size
    if n == 0:
        return 0.0
    if n <= _BLOCK:
        return float(np.add.reduce(flat))
    blocks = [flat[k : k + _BLOCK] for k in range(0, n, _BLOCK)]
    ex = _get_executor()
    if ex is None:
        partials = [np.add.reduce(b) for b in blocks]
    else:
        partials = list(ex.map(np.add.reduce, blocks))
    return float(np.add.reduce(np.asarray(partials)))


def dot(a: np.ndarray, b: np.ndarray) -> float:
    return pairwise_sum(np.ravel(a) * np.ravel(b))


def norm2(a: np.ndarray) -> float:
    return float(np.sqrt(max(dot(a, a), 0.0)))


def norm_inf(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a)))
