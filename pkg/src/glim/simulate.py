"""Ground-truth spread: Monte-Carlo cascades, exact live-edge enumeration, analytic upper bound."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, SizeError
from .graph import DirectedGraph, check_seeds

EXACT_EDGE_LIMIT = 25
CHUNK = 2048

_threads = os.cpu_count() or 1


def set_threads(n: int):
    """Cap the worker pool used for Monte-Carlo fan-out."""
    global _threads
    if n < 1:
        raise ValueError("threads must be >= 1")
    _threads = int(n)


@dataclass(frozen=True)
class SpreadEstimate:
    mean: float
    std_err: float
    n_sims: int
    rng_seed: int

    def to_json(self) -> dict:
        return {"mean": self.mean, "std_err": self.std_err, "n_sims": self.n_sims}


def _counts(g, seeds, n_sims, rng_seed, threads):
    key = _kernels.stream_key(rng_seed)
    chunks = [(s, min(CHUNK, n_sims - s)) for s in range(0, n_sims, CHUNK)]
    run = lambda c: _kernels.ic_counts(g.out_ptr, g.dst, g.p, seeds, key, c[0], c[1])
    workers = min(threads or _threads, len(chunks))
    if workers <= 1:
        parts = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, chunks))
    return np.concatenate(parts)


def simulate_ic(g: DirectedGraph, seeds, n_sims: int = 1000, rng_seed: int = 0,
                threads: int | None = None) -> SpreadEstimate:
    """Average activated-node count over ``n_sims`` independent cascades.

    Output depends only on ``(g, seeds, n_sims, rng_seed)``: edge coins are
    indexed by simulation and edge, so the thread count has no effect.
    Two calls with the same ``rng_seed`` share their random worlds, which
    makes the estimate monotone and submodular as a set function.
    """
    s = check_seeds(g, seeds)
    if s.size == 0:
        raise DomainError("seed set is empty")
    if n_sims < 1:
        raise DomainError("n_sims must be >= 1")
    counts = _counts(g, s, int(n_sims), rng_seed, threads)
    total = int(counts.sum())
    mean = total / n_sims
    if n_sims > 1:
        sq = float(np.dot(counts.astype(np.float64), counts))
        var = max(sq - total * mean, 0.0) / (n_sims - 1)
        se = math.sqrt(var / n_sims)
    else:
        se = 0.0
    return SpreadEstimate(mean, se, int(n_sims), int(rng_seed))


def exact_spread(g: DirectedGraph, seeds) -> SpreadEstimate:
    """Exact expected spread by enumerating all live-edge subsets (|E| <= 25)."""
    s = check_seeds(g, seeds)
    if g.n_edges > EXACT_EDGE_LIMIT:
        raise SizeError(f"exact enumeration limited to {EXACT_EDGE_LIMIT} edges, graph has {g.n_edges}")
    if s.size == 0:
        return SpreadEstimate(0.0, 0.0, 0, 0)
    val = _kernels.exact_reach(g.n, g.src, g.dst, g.p, s)
    return SpreadEstimate(float(val), 0.0, 0, 0)


def upper_bound_spread(g: DirectedGraph, seeds, hops: int = 2) -> float:
    """Untrained message-passing bound: repeated ``H <- A H`` from the seed indicator.

    Per-node totals over hops ``0..hops`` are capped at 1 before summing.
    """
    if not 1 <= hops <= 4:
        raise DomainError(f"hops must lie in [1, 4], got {hops}")
    s = check_seeds(g, seeds)
    h = np.zeros(g.n)
    h[s] = 1.0
    acc = h.copy()
    for _ in range(hops):
        h = g.A @ h
        acc += h
    return float(np.minimum(acc, 1.0).sum())
