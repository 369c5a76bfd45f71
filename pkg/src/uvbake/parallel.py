"""Worker-count policy and deterministic chunked execution.

Every parallel stage splits its work into contiguous chunks, runs them on a
thread pool (numpy releases the GIL inside the heavy kernels) and merges the
results in chunk order, so the output never depends on the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_THREADS = "UVBAKE_THREADS"


def worker_count(workers=None):
    """Resolve the number of workers: explicit value, else $UVBAKE_THREADS, 0 = auto."""
    if workers is None:
        raw = os.environ.get(ENV_THREADS, "0").strip() or "0"
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    if workers < 0:
        raise ValueError(f"worker count must be >= 0, got {workers}")
    if workers == 0:
        workers = os.cpu_count() or 1
    return workers


def split_range(n, parts):
    """Contiguous [start, stop) bounds splitting range(n) into at most `parts` pieces."""
    parts = max(1, min(parts, n)) if n > 0 else 1
    edges = np.linspace(0, n, parts + 1).astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def map_chunks(fn, n, workers=None):
    """Apply fn(start, stop) over a partition of range(n); results in chunk order."""
    chunks = split_range(n, worker_count(workers))
    if len(chunks) == 1:
        return [fn(*chunks[0])]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        return list(pool.map(lambda c: fn(*c), chunks))
