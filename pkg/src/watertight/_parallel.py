"""Thread-cap helper: WATERTIGHT_THREADS limits worker threads (0 = auto)."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    raw = os.environ.get("WATERTIGHT_THREADS", "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


def thread_map(fn, items):
    """Order-preserving map, threaded when WATERTIGHT_THREADS allows."""
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
