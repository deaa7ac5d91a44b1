"""Deterministic random substreams and ordered parallel mapping.

Every random draw in an experiment comes from a generator derived from one
root seed and an integer key::

    substream(root_seed, stage, trial, block, chunk)

The key is passed to :class:`numpy.random.SeedSequence` as its ``spawn_key``
so distinct keys give statistically independent PCG64 streams.  Because the
key is a function of *what* is being sampled (never of which worker samples
it), results do not depend on the number of threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

# stage tags, first component of every key
STAGE_INPUT = 1
STAGE_TRACES = 2
STAGE_PAIRS = 3
STAGE_SAMPLE_CMD = 4

# trials are sampled in chunks of this many traces, one substream each
CHUNK_TRACES = 1 << 15


def substream(root_seed: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("TRACELAB_THREADS", "1") or 1)
    return max(1, int(threads))


def ordered_map(fn, items, threads: int = 1) -> list:
    """``[fn(item) for item in items]``, optionally on a thread pool.

    Output order always follows input order.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
