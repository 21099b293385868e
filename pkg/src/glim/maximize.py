"""Seed selection: lazy-forward greedy over any estimator, the influence-set heuristic with
periodic graph pruning, and the DegreeDiscount / K-core baselines.  Ties go to the lowest id."""
from __future__ import annotations

import heapq
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .graph import DirectedGraph, check_seeds
from .simulate import exact_spread, simulate_ic


@dataclass
class MaximizeResult:
    method: str
    seeds: list
    gains: list = field(default_factory=list)
    step_ms: list = field(default_factory=list)
    n_forward: int = 0

    def to_json(self, g: DirectedGraph | None = None, timing=True) -> dict:
        seeds = [g.labels[v] for v in self.seeds] if g is not None else list(self.seeds)
        return {"method": self.method, "seeds": seeds,
                "per_step_gain": [float(x) for x in self.gains],
                "per_step_ms": [float(x) if timing else 0.0 for x in self.step_ms]}


class MonteCarloEstimator:
    """MC spread with a fixed cascade stream, so every call sees the same live-edge worlds."""

    def __init__(self, g, n_sims=1000, rng_seed=0, threads=None):
        self.g, self.n_sims, self.rng_seed, self.threads = g, n_sims, rng_seed, threads
        self.calls = 0

    def __call__(self, seeds) -> float:
        self.calls += 1
        if len(seeds) == 0:
            return 0.0
        return simulate_ic(self.g, seeds, self.n_sims, self.rng_seed, self.threads).mean


class ExactEstimator:
    def __init__(self, g):
        self.g = g

    def __call__(self, seeds) -> float:
        return exact_spread(self.g, seeds).mean


class _Timer:
    def __init__(self):
        self.t = time.perf_counter()

    def lap(self) -> float:
        now = time.perf_counter()
        dt, self.t = (now - self.t) * 1e3, now
        return dt


def filter_candidates(g: DirectedGraph, policy="mean", fraction=0.1, cap=5000) -> np.ndarray:
    """Candidate seeds by out-degree.

    ``mean`` keeps nodes at or above the mean out-degree, ``top`` the highest
    ``fraction`` of nodes, ``all`` everything; at most ``cap`` nodes survive.
    Returned in increasing id order.
    """
    deg = g.out_degree
    if g.n == 0:
        return np.zeros(0, dtype=np.int64)
    if policy == "all":
        keep = np.arange(g.n)
    elif policy == "mean":
        keep = np.flatnonzero(deg >= deg.mean())
    elif policy == "top":
        if not 0 < fraction <= 1:
            raise ConfigError("fraction must lie in (0, 1]")
        keep = np.lexsort((np.arange(g.n), -deg))[:max(1, int(np.ceil(fraction * g.n)))]
    else:
        raise ConfigError(f"unknown candidate policy {policy!r}")
    if keep.size > cap:
        keep = keep[np.lexsort((keep, -deg[keep]))[:cap]]
    return np.sort(keep).astype(np.int64)


def celf(g: DirectedGraph, k: int, estimate, candidates=None, estimate_many=None,
         empty_value=0.0, method="celf") -> MaximizeResult:
    """Lazy-forward greedy maximisation of ``estimate`` (a set function on node lists).

    ``estimate_many`` optionally evaluates a list of seed sets at once and is
    used for the exhaustive first round.  ``empty_value`` is the estimate of
    the empty set, the baseline of the first marginal gains.
    """
    cand = np.arange(g.n) if candidates is None else check_seeds(g, candidates)
    if k < 0:
        raise ConfigError("k must be non-negative")
    if k > cand.size:
        warnings.warn(f"k={k} exceeds {cand.size} candidates; selecting all of them")
        k = cand.size
    res = MaximizeResult(method, [])
    if k == 0:
        return res
    timer = _Timer()
    singles = [[int(v)] for v in cand]
    vals = estimate_many(singles) if estimate_many is not None else [estimate(s) for s in singles]
    heap = [(-(float(val) - empty_value), int(v), 0, float(val)) for v, val in zip(cand, vals)]
    heapq.heapify(heap)
    current = empty_value
    seeds = []
    while len(seeds) < k:
        neg_gain, v, it, val = heapq.heappop(heap)
        if it == len(seeds):
            seeds.append(v)
            res.gains.append(-neg_gain)
            res.step_ms.append(timer.lap())
            current = val
        else:
            val = float(estimate(seeds + [v]))
            heapq.heappush(heap, (-(val - current), v, len(seeds), val))
    res.seeds = seeds
    return res


def celf_mc(g, k, n_sims=1000, rng_seed=0, candidates=None, threads=None) -> MaximizeResult:
    est = MonteCarloEstimator(g, n_sims, rng_seed, threads)
    res = celf(g, k, est, candidates, method="celf-mc")
    res.n_forward = est.calls
    return res


def celf_glie(g, k, model, candidates="mean") -> MaximizeResult:
    """Lazy greedy with the learned estimator over degree-filtered candidates."""
    from .glie import GlieEstimator

    est = GlieEstimator(model, g)
    cand = filter_candidates(g, candidates) if isinstance(candidates, str) else candidates
    res = celf(g, k, est.predict, cand, est.predict_many, est.predict([]), method="celf-glie")
    res.n_forward = est.n_forward
    return res


def pun(g: DirectedGraph, k: int, model, aff_interval=5) -> MaximizeResult:
    """Pick the node with the largest probability mass towards predicted-uninfluenced nodes.

    Every ``aff_interval`` seeds the nodes predicted influenced (seeds
    included) are deleted from the working graph and selection restarts on
    the remainder with an empty working seed set.
    """
    from .glie import GlieEstimator

    if aff_interval < 1:
        raise ConfigError("aff_interval must be >= 1")
    if k < 0:
        raise ConfigError("k must be non-negative")
    res = MaximizeResult("pun", [])
    if k == 0 or g.n == 0:
        return res
    timer = _Timer()
    work, nodes = g, np.arange(g.n)
    est = GlieEstimator(model, work)
    first = int(np.argmax(g.out_degree))
    local = [first]
    res.seeds.append(first)
    res.gains.append(float(g.out_degree[first]))
    res.step_ms.append(timer.lap())
    forwards = 0
    while len(res.seeds) < k:
        if len(res.seeds) % aff_interval == 0:
            sets = est.influence_sets(local)
            keep = ~sets.influenced
            if not keep.any():
                break
            forwards += est.n_forward
            work, sub = work.subgraph(keep)
            nodes = nodes[sub]
            est = GlieEstimator(model, work)
            local = []
        if len(local) >= work.n:
            break
        sets = est.influence_sets(local)
        gains = sets.gains.copy()
        gains[local] = -np.inf
        v = int(np.argmax(gains))
        local.append(v)
        res.seeds.append(int(nodes[v]))
        res.gains.append(float(gains[v]))
        res.step_ms.append(timer.lap())
    res.n_forward = forwards + est.n_forward
    if len(res.seeds) < k:
        warnings.warn(f"graph exhausted after {len(res.seeds)} of {k} seeds")
    return res


def degree_discount(g: DirectedGraph, k: int) -> MaximizeResult:
    """DegreeDiscount with the mean incoming probability of each node standing in for p."""
    if k < 0:
        raise ConfigError("k must be non-negative")
    timer = _Timer()
    deg = g.out_degree.astype(np.float64)
    indeg = g.in_degree
    p_in = np.bincount(g.dst, weights=g.p, minlength=g.n) / np.maximum(indeg, 1)
    seeded_in = np.zeros(g.n)
    dd = deg.copy()
    chosen = np.zeros(g.n, dtype=bool)
    res = MaximizeResult("degdisc", [])
    for _ in range(min(k, g.n)):
        score = np.where(chosen, -np.inf, dd)
        u = int(np.argmax(score))
        chosen[u] = True
        res.seeds.append(u)
        res.gains.append(float(dd[u]))
        for v in g.out_neighbors(u):
            if chosen[v]:
                continue
            seeded_in[v] += 1
            t = seeded_in[v]
            dd[v] = deg[v] - 2 * t - (deg[v] - t) * t * p_in[v]
        res.step_ms.append(timer.lap())
    return res


def core_numbers(g: DirectedGraph) -> np.ndarray:
    """Core number of every node of the undirected skeleton (bucket peeling)."""
    n = g.n
    a = np.minimum(g.src, g.dst)
    b = np.maximum(g.src, g.dst)
    key = np.unique(a * max(n, 1) + b)
    a, b = key // max(n, 1), key % max(n, 1)
    nbr_src = np.concatenate([a, b])
    nbr_dst = np.concatenate([b, a])
    order = np.argsort(nbr_src, kind="stable")
    adj = nbr_dst[order]
    ptr = np.concatenate([[0], np.cumsum(np.bincount(nbr_src, minlength=n))])
    deg = np.diff(ptr).astype(np.int64)
    # Batagelj-Zaversnik: nodes sorted by current degree, degrees lowered in place
    max_deg = int(deg.max()) if n else 0
    bins = np.bincount(deg, minlength=max_deg + 1)
    start = np.concatenate([[0], np.cumsum(bins)[:-1]])
    vert = np.argsort(deg, kind="stable")
    pos = np.empty(n, dtype=np.int64)
    pos[vert] = np.arange(n)
    for i in range(n):
        v = vert[i]
        for u in adj[ptr[v]:ptr[v + 1]]:
            if deg[u] > deg[v]:
                du = deg[u]
                pu, pw = pos[u], start[du]
                w = vert[pw]
                if u != w:
                    vert[pu], vert[pw] = w, u
                    pos[u], pos[w] = pw, pu
                start[du] += 1
                deg[u] -= 1
    return deg


def k_core(g: DirectedGraph, k: int) -> MaximizeResult:
    """Top-k nodes by core number, then skeleton degree, then lowest id."""
    if k < 0:
        raise ConfigError("k must be non-negative")
    timer = _Timer()
    core = core_numbers(g)
    sym = np.unique(np.minimum(g.src, g.dst) * max(g.n, 1) + np.maximum(g.src, g.dst))
    und = np.bincount(np.concatenate([sym // max(g.n, 1), sym % max(g.n, 1)]), minlength=g.n)
    order = np.lexsort((np.arange(g.n), -und, -core))[:min(k, g.n)]
    res = MaximizeResult("kcore", [int(v) for v in order])
    res.gains = [float(core[v]) for v in order]
    total = timer.lap()
    res.step_ms = [total / max(1, len(order))] * len(order)
    return res


METHODS = ("celf-mc", "celf-glie", "pun", "grim", "degdisc", "kcore")
