"""Chunked, optionally threaded evaluation of vectorized kernels.

numpy's batched LAPACK routines release the GIL, so a thread pool gives
real parallelism for grid scans.  Chunks are reassembled in input order,
which keeps results independent of scheduling.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_THREADS = "TOEPLITZ_SPECTRA_THREADS"


def resolve_threads(threads=None) -> int:
    if threads is None:
        env = os.environ.get(ENV_THREADS, "").strip()
        threads = int(env) if env else 1
    return max(1, int(threads))


def map_chunks(fn, values, threads=None, chunk: int = 20000):
    """Apply ``fn`` to consecutive chunks of the flat array ``values`` and
    concatenate the results along the first axis."""
    values = np.asarray(values)
    if values.size == 0:
        return fn(values)
    parts = [values[a:a + chunk] for a in range(0, values.size, chunk)]
    n = resolve_threads(threads)
    if n == 1 or len(parts) == 1:
        out = [fn(p) for p in parts]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            out = list(pool.map(fn, parts))
    if isinstance(out[0], tuple):
        return tuple(np.concatenate(col) for col in zip(*out))
    return np.concatenate(out)
