"""Deterministic fan-out of replicate chunks over a process pool.

Results are always assembled in replicate order, so the output of a run is
invariant under the worker count; the noise streams themselves are pure
functions of (seed, replicate_index), see sim.noise_stream.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def available_workers():
    return os.cpu_count() or 1


def _invoke(payload):
    task, lo, hi = payload
    try:
        return task(lo, hi)
    except Exception as exc:
        raise RuntimeError(f"replicate chunk [{lo}, {hi}) failed: {exc}") from exc


def replicate_map(task, n_replicates, workers=1, chunk_size=None):
    """Run ``task(lo, hi)`` over a partition of range(n_replicates).

    ``task`` must be picklable (a module-level function or a
    functools.partial over one). Returns the list of chunk results in
    replicate order.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    workers = max(1, int(workers))
    if chunk_size is None:
        chunk_size = max(1, -(-n_replicates // (4 * workers)))
    bounds = [(lo, min(lo + chunk_size, n_replicates)) for lo in range(0, n_replicates, chunk_size)]
    if workers == 1 or len(bounds) == 1:
        return [_invoke((task, lo, hi)) for lo, hi in bounds]
    from . import sim

    sim.warmup()  # compile before forking so children inherit the JIT state
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_invoke, [(task, lo, hi) for lo, hi in bounds]))
