"""Trial-level parallelism with a thread-count cap from the environment."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def thread_cap() -> int:
    """Worker cap: EMD_LSH_THREADS if set, else the CPU count."""
    value = os.environ.get("EMD_LSH_THREADS", "").strip()
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1


def parallel_map(fn, args_list, min_batch: int = 8) -> list:
    """Map fn over per-trial arguments, in order.

    Trials carry their own derived seeds, so scheduling cannot change any
    result; assembly is always in submission order.
    """
    args_list = list(args_list)
    cap = thread_cap()
    if cap <= 1 or len(args_list) < min_batch:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=cap) as ex:
        return list(ex.map(fn, args_list))
