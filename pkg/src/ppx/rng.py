"""Seed derivation and replication fan-out.

Every replication gets its own PCG64 stream built from
``SeedSequence(seed, spawn_key=(tag..., index))``. SeedSequence hashes its
inputs, so streams are independent, stable across platforms and numpy
versions that keep the SeedSequence contract, and do not depend on how
replications are scheduled across threads.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

MASK64 = (1 << 64) - 1


def _key(parts: Sequence[int | str]) -> tuple[int, ...]:
    out = []
    for p in parts:
        if isinstance(p, str):
            # Python's hash() is salted per process; use a fixed digest
            out.append(int.from_bytes(hashlib.sha256(p.encode("utf-8")).digest()[:8], "little"))
        else:
            out.append(int(p) & MASK64)
    return tuple(out)


def generator(seed: int, *keys: int | str) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=_key(keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *keys: int | str) -> int:
    """A 64-bit child seed, for handing to functions that take a plain int."""
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=_key(keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("PPX_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def replicate(
    fn: Callable[[np.random.Generator], np.ndarray | float],
    reps: int,
    seed: int,
    *keys: int | str,
    threads: int | None = None,
    width: int | None = None,
) -> np.ndarray:
    """Run ``fn`` once per replication and stack the results.

    ``fn`` receives the replication's generator and returns a scalar or a
    1-D array of fixed length ``width``. Row ``r`` of the result always comes
    from stream ``(seed, *keys, r)`` so the output is identical for any
    thread count.
    """
    return replicate_indexed(lambda r: fn(generator(seed, *keys, r)), reps, threads=threads, width=width)


def replicate_indexed(
    fn: Callable[[int], np.ndarray | float],
    reps: int,
    *,
    threads: int | None = None,
    width: int | None = None,
) -> np.ndarray:
    """Like :func:`replicate` but hands ``fn`` the replication index, for
    callers that build several keyed streams per replication."""
    threads = resolve_threads(threads)
    shape = (reps,) if width is None else (reps, width)
    out = np.empty(shape, dtype=float)

    def run(lo: int, hi: int) -> None:
        for r in range(lo, hi):
            out[r] = fn(r)

    if threads == 1 or reps < 2 * threads:
        run(0, reps)
        return out
    bounds = np.linspace(0, reps, threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(run, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
        for f in futures:
            f.result()
    return out


def mean_se(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and standard errors with a fixed reduction order."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    mean = values.sum(axis=0) / n
    if n < 2:
        return mean, np.zeros_like(mean)
    var = ((values - mean) ** 2).sum(axis=0) / (n - 1)
    return mean, np.sqrt(var / n)
