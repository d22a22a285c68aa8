import os
from concurrent.futures import ThreadPoolExecutor


def max_workers():
    """Worker cap from ``PH_EQ_THREADS``; unset or invalid means serial."""
    try:
        n = int(os.environ.get("PH_EQ_THREADS", "1"))
    except ValueError:
        return 1
    return max(n, 1)


def parallel_map(fn, items):
    """Map ``fn`` over ``items``; results are always in input order."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
