"""Directed influence graphs: construction, probability assignment, generators and edge-list I/O.

Edges point from influencer to influenced (``src -> dst`` means ``src`` may
activate ``dst``).  The message-passing matrix ``A`` used throughout the
package stores in-edges by row, ``A[u, v] = p(v -> u)``.
"""
from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ParseError, ValidationError

WEIGHTINGS = ("wc", "uniform", "explicit", "none")


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Immutable directed graph with one influence probability per edge.

    Edges are stored sorted by ``(src, dst)``; ``labels[i]`` is the original
    label of dense node ``i``.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    p: np.ndarray
    labels: tuple = field(default=())
    weighting: str = "explicit"

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        p = np.asarray(self.p, dtype=np.float64)
        if not (src.shape == dst.shape == p.shape) or src.ndim != 1:
            raise ValidationError("src, dst and p must be 1-d arrays of equal length")
        if self.n < 0:
            raise ValidationError("node count must be non-negative")
        if src.size:
            if src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= self.n:
                raise ValidationError("node id out of range")
            if np.any(src == dst):
                raise ValidationError("self-loops are not allowed")
        if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
            raise ValidationError("edge probability outside [0, 1]")
        order = np.lexsort((dst, src))
        src, dst, p = src[order], dst[order], p[order]
        if src.size > 1:
            dup = (src[1:] == src[:-1]) & (dst[1:] == dst[:-1])
            if dup.any():
                i = int(np.argmax(dup))
                raise ValidationError(f"duplicate edge ({src[i]}, {dst[i]})")
        labels = tuple(self.labels) if self.labels else tuple(range(self.n))
        if len(labels) != self.n:
            raise ValidationError("label map length differs from node count")
        if self.weighting not in WEIGHTINGS:
            raise ValidationError(f"unknown weighting {self.weighting!r}")
        for arr in (src, dst, p):
            arr.setflags(write=False)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "labels", labels)

    @property
    def n_edges(self) -> int:
        return int(self.src.size)

    @property
    def edges(self):
        return [(int(s), int(d), float(q)) for s, d, q in zip(self.src, self.dst, self.p)]

    def with_probabilities(self, p, weighting="explicit") -> "DirectedGraph":
        return DirectedGraph(self.n, self.src, self.dst, p, self.labels, weighting)

    # -- derived structures (computed lazily, never mutated) --

    @cached_property
    def out_ptr(self) -> np.ndarray:
        # edges are already sorted by src, so CSR over src is the edge order itself
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.src, minlength=self.n), out=ptr[1:])
        return ptr

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_ptr)

    @cached_property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n).astype(np.int64)

    @cached_property
    def in_order(self) -> np.ndarray:
        """Edge indices sorted by (dst, src)."""
        return np.lexsort((self.src, self.dst))

    @cached_property
    def in_ptr(self) -> np.ndarray:
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(self.in_degree, out=ptr[1:])
        return ptr

    def out_neighbors(self, u: int) -> np.ndarray:
        return self.dst[self.out_ptr[u]:self.out_ptr[u + 1]]

    def in_neighbors(self, u: int) -> list[tuple[int, float]]:
        idx = self.in_order[self.in_ptr[u]:self.in_ptr[u + 1]]
        return [(int(self.src[e]), float(self.p[e])) for e in idx]

    @cached_property
    def A(self) -> sp.csr_matrix:
        """Row u holds the probabilities of the in-edges of u."""
        m = sp.csr_matrix((self.p, (self.dst, self.src)), shape=(self.n, self.n))
        m.sort_indices()
        return m

    @cached_property
    def AT(self) -> sp.csr_matrix:
        m = self.A.T.tocsr()
        m.sort_indices()
        return m

    def subgraph(self, keep) -> tuple["DirectedGraph", np.ndarray]:
        """Induced subgraph on ``keep`` (bool mask or index array), probabilities kept as-is.

        Returns the subgraph and the array mapping new ids to ids of this graph.
        """
        keep = np.asarray(keep)
        if keep.dtype == bool:
            nodes = np.flatnonzero(keep)
        else:
            nodes = np.unique(keep.astype(np.int64))
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[nodes] = np.arange(nodes.size)
        e = (remap[self.src] >= 0) & (remap[self.dst] >= 0)
        labels = tuple(self.labels[i] for i in nodes)
        sub = DirectedGraph(int(nodes.size), remap[self.src[e]], remap[self.dst[e]],
                            self.p[e], labels, self.weighting)
        return sub, nodes

    def canonical_bytes(self) -> bytes:
        buf = io.StringIO()
        write_edge_list(self, buf)
        return buf.getvalue().encode("utf-8")


def check_seeds(g: DirectedGraph, seeds: Iterable[int]) -> np.ndarray:
    """Validate a seed set (distinct node ids < n) and return it as an int array."""
    arr = np.asarray(list(seeds), dtype=np.int64)
    if arr.ndim != 1:
        raise ValidationError("seed set must be a flat sequence")
    if arr.size and (arr.min() < 0 or arr.max() >= g.n):
        raise ValidationError("seed id out of range")
    if np.unique(arr).size != arr.size:
        raise ValidationError("duplicate seed")
    return arr


def from_edges(n: int, edges: Sequence[tuple], weighting="explicit") -> DirectedGraph:
    """Build a graph from ``(src, dst)`` or ``(src, dst, p)`` tuples."""
    if not edges:
        return DirectedGraph(n, np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
    arr = [tuple(e) for e in edges]
    src = np.array([e[0] for e in arr], dtype=np.int64)
    dst = np.array([e[1] for e in arr], dtype=np.int64)
    p = np.array([e[2] if len(e) > 2 else 0.0 for e in arr], dtype=np.float64)
    return DirectedGraph(n, src, dst, p, weighting=weighting)


# ---------------------------------------------------------------- probabilities

def assign_weighted_cascade(g: DirectedGraph) -> DirectedGraph:
    """Every in-edge of u gets probability 1/indeg(u)."""
    if g.n_edges == 0:
        return g.with_probabilities(g.p, "wc")
    p = 1.0 / g.in_degree[g.dst]
    return g.with_probabilities(p, "wc")


def uniform_ic(g: DirectedGraph, p: float) -> DirectedGraph:
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"probability {p} outside [0, 1]")
    return g.with_probabilities(np.full(g.n_edges, float(p)), "uniform")


def symmetrize(g: DirectedGraph) -> DirectedGraph:
    """Add every missing reverse edge; probabilities reset to 0."""
    src = np.concatenate([g.src, g.dst])
    dst = np.concatenate([g.dst, g.src])
    key = np.unique(src * max(g.n, 1) + dst)
    n = max(g.n, 1)
    return DirectedGraph(g.n, key // n, key % n, np.zeros(key.size), g.labels, "none")


# ----------------------------------------------------------------- generators

@dataclass(frozen=True)
class GeneratorConfig:
    model: str = "barabasi-albert"
    n: int = 100
    m: int = 2
    triad_p: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.model not in ("barabasi-albert", "holme-kim"):
            raise ConfigError(f"unknown generator model {self.model!r}")
        if not 1 <= self.m < self.n:
            raise ConfigError(f"need 1 <= m < n, got m={self.m}, n={self.n}")
        if not 0.0 <= self.triad_p <= 1.0:
            raise ConfigError("triad_p must lie in [0, 1]")


MODEL_ALIASES = {"ba": "barabasi-albert", "hk": "holme-kim"}


def make_rng(seed) -> np.random.Generator:
    """The package-wide generator: PCG64 seeded from a 64-bit integer."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _random_subset(rng, seq, m):
    targets = set()
    while len(targets) < m:
        targets.add(seq[int(rng.integers(len(seq)))])
    return sorted(targets)


def _undirected_ba(cfg, rng):
    m, n = cfg.m, cfg.n
    edges = set()
    repeated = []
    targets = list(range(m))
    for source in range(m, n):
        for t in targets:
            edges.add((min(source, t), max(source, t)))
        repeated.extend(targets)
        repeated.extend([source] * m)
        targets = _random_subset(rng, repeated, m)
    return edges


def _undirected_hk(cfg, rng):
    m, n = cfg.m, cfg.n
    adj = [set() for _ in range(n)]
    repeated = list(range(m))

    def add(a, b):
        adj[a].add(b)
        adj[b].add(a)
        repeated.append(b)

    for source in range(m, n):
        possible = _random_subset(rng, repeated, m)
        rng.shuffle(possible)
        target = possible.pop()
        add(source, target)
        count = 1
        while count < m:
            if rng.random() < cfg.triad_p:
                hood = sorted(v for v in adj[target] if v != source and v not in adj[source])
                if hood:
                    add(source, hood[int(rng.integers(len(hood)))])
                    count += 1
                    continue
            if not possible:
                break
            target = possible.pop()
            add(source, target)
            count += 1
        repeated.extend([source] * m)
    return {(a, b) for a in range(n) for b in adj[a] if a < b}


def generate(cfg: GeneratorConfig) -> DirectedGraph:
    """Preferential-attachment graph, symmetrized and weighted-cascade assigned."""
    rng = make_rng(cfg.rng_seed)
    und = _undirected_ba(cfg, rng) if cfg.model == "barabasi-albert" else _undirected_hk(cfg, rng)
    und = sorted(und)
    src = np.array([a for a, _ in und], dtype=np.int64)
    dst = np.array([b for _, b in und], dtype=np.int64)
    g = DirectedGraph(cfg.n, src, dst, np.zeros(src.size), weighting="none")
    return assign_weighted_cascade(symmetrize(g))


# ------------------------------------------------------------------ edge lists

def _parse_label(tok):
    try:
        return int(tok)
    except ValueError:
        return tok


def load_edge_list(text, weighted: bool = False) -> DirectedGraph:
    """Parse ``src dst [p]`` lines; ``#`` lines are comments.

    ``text`` may be ``str``, ``bytes`` or a binary/text stream.  Node labels are
    re-indexed densely in sorted label order.
    """
    if hasattr(text, "read"):
        text = text.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    raw = []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        toks = s.split()
        if (weighted and len(toks) != 3) or (not weighted and len(toks) not in (2, 3)):
            raise ParseError(lineno, f"expected {'3' if weighted else '2'} fields, got {len(toks)}")
        a, b = _parse_label(toks[0]), _parse_label(toks[1])
        if a == b:
            raise ValidationError(f"line {lineno}: self-loop on {toks[0]}")
        q = 0.0
        if weighted:
            try:
                q = float(toks[2])
            except ValueError:
                raise ParseError(lineno, f"bad probability {toks[2]!r}") from None
            if not 0.0 <= q <= 1.0:
                raise ValidationError(f"line {lineno}: probability {q} outside [0, 1]")
        raw.append((a, b, q, lineno))
    labels = sorted({r[0] for r in raw} | {r[1] for r in raw}, key=lambda x: (isinstance(x, str), x))
    index = {lab: i for i, lab in enumerate(labels)}
    seen = {}
    for a, b, _, lineno in raw:
        key = (index[a], index[b])
        if key in seen:
            raise ValidationError(f"line {lineno}: duplicate edge {a} {b} (first on line {seen[key]})")
        seen[key] = lineno
    src = np.array([index[r[0]] for r in raw], dtype=np.int64)
    dst = np.array([index[r[1]] for r in raw], dtype=np.int64)
    p = np.array([r[2] for r in raw], dtype=np.float64)
    return DirectedGraph(len(labels), src, dst, p, tuple(labels),
                         "explicit" if weighted else "none")


def write_edge_list(g: DirectedGraph, fh):
    for s, d, q in zip(g.src, g.dst, g.p):
        fh.write(f"{g.labels[s]} {g.labels[d]} {q:.9g}\n")


def metadata(g: DirectedGraph) -> dict:
    return {"n": g.n, "directed": True, "weighting": g.weighting, "label_map": list(g.labels)}


def save_graph(g: DirectedGraph, path):
    """Write ``path`` (canonical edge list) and ``path + '.json'`` (metadata sidecar)."""
    path = os.fspath(path)
    with open(path, "w", encoding="utf-8") as fh:
        write_edge_list(g, fh)
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(metadata(g), fh, sort_keys=True)
        fh.write("\n")


def load_graph(path) -> DirectedGraph:
    """Load an edge-list file, honouring its metadata sidecar when present.

    Files without a sidecar are read as weighted if every line carries a
    probability, otherwise as unweighted with weighted-cascade assignment.
    """
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    meta = None
    if os.path.exists(path + ".json"):
        with open(path + ".json", "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    weighted = bool(rows) and all(len(r) == 3 for r in rows)
    g = load_edge_list(text, weighted=weighted)
    if meta is not None:
        labels = list(meta["label_map"])
        if len(labels) != meta["n"]:
            raise ValidationError(f"{path}.json: label_map length differs from n")
        index = {lab: i for i, lab in enumerate(labels)}
        try:
            src = np.array([index[g.labels[s]] for s in g.src], dtype=np.int64)
            dst = np.array([index[g.labels[d]] for d in g.dst], dtype=np.int64)
        except KeyError as exc:
            raise ValidationError(f"{path}: label {exc} missing from sidecar") from None
        g = DirectedGraph(meta["n"], src, dst, g.p, tuple(labels),
                          meta.get("weighting", "explicit"))
    if not weighted:
        g = assign_weighted_cascade(g)
    return g


def graph_from_spec(spec) -> DirectedGraph:
    """Resolve a graph entry of an experiment config: a path or a generator dict."""
    if isinstance(spec, str):
        return load_graph(spec)
    spec = dict(spec)
    if "path" in spec:
        return load_graph(spec["path"])
    model = MODEL_ALIASES.get(spec.get("model", "ba"), spec.get("model", "ba"))
    return generate(GeneratorConfig(model=model, n=int(spec["n"]), m=int(spec.get("m", 2)),
                                    triad_p=float(spec.get("triad_p", 0.5)),
                                    rng_seed=int(spec.get("seed", 0))))
