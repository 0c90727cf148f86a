"""Worker-count control shared by the modules.

Work is always split into the same fixed chunks; the worker count only
decides how many chunks run at once, so results never depend on it. BLAS
threads are pinned to one inside :func:`pinned_blas` for the same reason.
"""

from __future__ import annotations

import contextlib
import os
from concurrent.futures import ThreadPoolExecutor

from threadpoolctl import threadpool_limits

_WORKERS = 1


def set_workers(n: int | None) -> int:
    """Set the worker count (``None`` or 0 means ``os.cpu_count()``); returns the value in effect."""
    global _WORKERS
    if n is None or n == 0:
        n = os.cpu_count() or 1
    if n < 0:
        raise ValueError("worker count must be nonnegative")
    _WORKERS = int(n)
    return _WORKERS


def get_workers() -> int:
    return _WORKERS


def ordered_map(fn, items):
    """``[fn(x) for x in items]`` evaluated on the worker pool, order preserved."""
    items = list(items)
    if _WORKERS <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_WORKERS) as pool:
        return list(pool.map(fn, items))


@contextlib.contextmanager
def pinned_blas():
    """Run BLAS/LAPACK single-threaded so reductions keep a fixed order."""
    with threadpool_limits(limits=1):
        yield
