"""Order-preserving process-pool map with a worker cap from ``ANTIPLAN_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("ANTIPLAN_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ValueError(f"ANTIPLAN_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def ordered_map(fn, items, workers: int | None = None) -> list:
    """``[fn(x) for x in items]``, possibly in worker processes; result order is input order."""
    items = list(items)
    n = min(worker_count(workers), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
