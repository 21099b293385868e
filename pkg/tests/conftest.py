import itertools
from collections import deque

import numpy as np
import pytest

from glim.dataset import build_dataset
from glim.glie import GlieConfig, train
from glim.graph import DirectedGraph, GeneratorConfig, from_edges, make_rng


def brute_force_spread(g: DirectedGraph, seeds) -> float:
    """Independent oracle: enumerate live-edge outcomes with itertools and BFS each world."""
    seeds = list(seeds)
    if not seeds:
        return 0.0
    edges = g.edges
    total = 0.0
    for live in itertools.product((0, 1), repeat=len(edges)):
        w = 1.0
        adj = {}
        for (s, d, p), on in zip(edges, live):
            w *= p if on else 1.0 - p
            if on:
                adj.setdefault(s, []).append(d)
        if w == 0.0:
            continue
        seen = set(seeds)
        queue = deque(seeds)
        while queue:
            u = queue.popleft()
            for v in adj.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        total += w * len(seen)
    return total


def naive_greedy(nodes, k, f):
    """Plain greedy: full re-evaluation each round, ties to lowest id."""
    chosen = []
    for _ in range(k):
        base = f(chosen)
        best, best_gain = None, -np.inf
        for v in sorted(nodes):
            if v in chosen:
                continue
            gain = f(chosen + [v]) - base
            if gain > best_gain:
                best, best_gain = v, gain
        chosen.append(best)
    return chosen


def random_small_graph(rng, n_max=6, e_max=10, dag=False):
    n = int(rng.integers(2, n_max + 1))
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b and (not dag or a < b)]
    m = int(rng.integers(1, min(e_max, len(pairs)) + 1))
    pick = rng.choice(len(pairs), size=m, replace=False)
    edges = [(pairs[i][0], pairs[i][1], float(rng.uniform(0.05, 0.95))) for i in pick]
    return from_edges(n, edges)


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def triangle():
    return from_edges(3, [(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.5)])


@pytest.fixture
def chain():
    return from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])


@pytest.fixture(scope="session")
def small_model():
    """A quickly trained estimator on a handful of small synthetic graphs."""
    cfgs = [GeneratorConfig("barabasi-albert" if i % 2 == 0 else "holme-kim", 60 + 10 * i, 3, 0.5, 50 + i)
            for i in range(6)]
    ds = build_dataset(cfgs, max_seeds=3, n_sims=300, negatives_per_size=6, rng_seed=3)
    return train(GlieConfig(epochs=15, patience=15, rng_seed=0), ds), ds
