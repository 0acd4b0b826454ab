"""Chunked, reproducible Monte Carlo sampling.

Draws are produced in fixed-size chunks, chunk ``i`` using the ``i``-th child
of ``SeedSequence(seed)``.  The output therefore depends only on
``(seed, n, chunk)`` and never on how many workers produced it.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 1 << 16


def chunk_plan(n, seed, chunk=CHUNK):
    """List of (size, SeedSequence) pairs covering n draws."""
    n = int(n)
    count = -(-n // chunk)
    children = np.random.SeedSequence(seed).spawn(count)
    sizes = [chunk] * (count - 1) + [n - chunk * (count - 1)]
    return list(zip(sizes, children))


def draw_chunked(draw, n, seed, workers=1, chunk=CHUNK):
    """Concatenate ``draw(size, rng)`` over the chunk plan, in chunk order."""
    plan = chunk_plan(n, seed, chunk)

    def run(item):
        size, ss = item
        return draw(size, np.random.default_rng(ss))

    if workers > 1 and len(plan) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, plan))
    else:
        parts = [run(item) for item in plan]
    return np.concatenate(parts, axis=0)


def child_rng(seed, index):
    """Generator for replicate ``index`` of a master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(index),)))
