"""Replication-level parallelism, capped by the BAYESCG_LAB_THREADS environment variable.

Replications derive their random streams from (seed, index), so execution
order cannot change results; the fold over replication outputs always happens
in index order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def max_threads() -> int:
    raw = os.environ.get("BAYESCG_LAB_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(value, 1)


def map_indexed(fn, count: int) -> list:
    """[fn(0), ..., fn(count-1)], possibly computed in parallel but always in order."""
    workers = max_threads()
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=min(workers, count)) as pool:
        return list(pool.map(fn, range(count)))
