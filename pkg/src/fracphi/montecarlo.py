"""Chunked, reproducible Monte Carlo driver.

Work is split into fixed-size chunks. Chunk ``i`` draws from its own
generator seeded by ``SeedSequence(seed, spawn_key=(i,))`` so results depend
only on ``(seed, chunk_size)`` and never on the number of worker threads.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_CHUNK = 20_000


def chunk_rng(seed, index):
    """Generator for chunk ``index`` of a run seeded with ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def chunk_sizes(n_total, chunk_size=DEFAULT_CHUNK):
    n_total = int(n_total)
    chunk_size = int(chunk_size)
    if n_total <= 0 or chunk_size <= 0:
        raise ValueError("n_total and chunk_size must be positive")
    full, rest = divmod(n_total, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def run_chunked(worker, n_total, seed, chunk_size=DEFAULT_CHUNK, threads=1):
    """Run ``worker(n, rng)`` over chunks and return the results in chunk order.

    Parameters
    ----------
    worker : callable
        ``worker(n, rng)`` returns anything (typically an array of length n).
    n_total : int
        Total number of samples.
    seed : int
        Master seed.
    chunk_size : int
        Samples per chunk. Part of the reproducibility key.
    threads : int
        Worker threads. Does not affect results.
    """
    sizes = chunk_sizes(n_total, chunk_size)
    jobs = [(n, chunk_rng(seed, i)) for i, n in enumerate(sizes)]
    if threads is None or threads <= 1 or len(jobs) == 1:
        return [worker(n, rng) for n, rng in jobs]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(lambda job: worker(*job), jobs))
