"""Training data for the spread estimator: greedy-optimal and random seed sets on synthetic graphs."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidationError
from .graph import DirectedGraph, GeneratorConfig, generate, load_graph, make_rng
from .maximize import MonteCarloEstimator, celf

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class TrainingSample:
    graph_id: int
    seeds: tuple
    label: float


@dataclass
class Dataset:
    graphs: list
    samples: list
    split_of: dict = field(default_factory=dict)   # graph_id -> split name
    paths: list | None = None

    def split(self, name: str) -> list:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return [s for s in self.samples if self.split_of.get(s.graph_id) == name]

    def graph_ids(self, name: str) -> list:
        return sorted(i for i, sp in self.split_of.items() if sp == name)


def split_graphs(n_graphs: int, rng, fractions=(0.6, 0.2, 0.2)) -> dict:
    """Assign whole graphs to train/val/test; rounding leftovers go to train."""
    order = rng.permutation(n_graphs)
    n_val = int(round(fractions[1] * n_graphs))
    n_test = int(round(fractions[2] * n_graphs))
    if n_graphs >= 3:
        n_val, n_test = max(n_val, 1), max(n_test, 1)
    n_train = n_graphs - n_val - n_test
    names = ["train"] * n_train + ["val"] * n_val + ["test"] * n_test
    return {int(g): names[i] for i, g in enumerate(order)}


def label_graph(g: DirectedGraph, graph_id: int, max_seeds=5, n_sims=1000,
                negatives_per_size=30, rng=None, label_seed=0) -> list:
    """Greedy-prefix and random seed sets of sizes ``1..max_seeds`` with MC labels.

    All labels on one graph share the cascade worlds of ``label_seed``, so the
    greedy run sees an exactly monotone submodular objective.
    """
    if max_seeds < 1 or n_sims < 1 or negatives_per_size < 0:
        raise ConfigError("max_seeds and n_sims must be >= 1, negatives_per_size >= 0")
    if max_seeds > g.n:
        raise ConfigError(f"max_seeds={max_seeds} exceeds graph size {g.n}")
    rng = make_rng(label_seed) if rng is None else rng
    est = MonteCarloEstimator(g, n_sims=n_sims, rng_seed=label_seed)
    res = celf(g, max_seeds, est, method="celf-mc")
    out = []
    for size in range(1, max_seeds + 1):
        prefix = tuple(int(v) for v in res.seeds[:size])
        out.append(TrainingSample(graph_id, prefix, est(prefix)))
        for _ in range(negatives_per_size):
            s = tuple(int(v) for v in np.sort(rng.choice(g.n, size=size, replace=False)))
            out.append(TrainingSample(graph_id, s, est(s)))
    return out


def build_dataset(graphs, max_seeds=5, n_sims=1000, negatives_per_size=30, rng_seed=0,
                  paths=None) -> Dataset:
    """Label every graph (list of graphs or generator configs) and split by graph 60/20/20."""
    graphs = [generate(g) if isinstance(g, GeneratorConfig) else g for g in graphs]
    rng = make_rng(rng_seed)
    label_seeds = rng.integers(0, 2**63 - 1, size=len(graphs))
    samples = []
    for gid, g in enumerate(graphs):
        samples += label_graph(g, gid, max_seeds, n_sims, negatives_per_size, rng,
                               int(label_seeds[gid]))
    return Dataset(graphs, samples, split_graphs(len(graphs), rng), paths)


def protocol_configs(n_small=100, n_large=30, m=5, rng_seed=0) -> list:
    """Generator configs of the training protocol: small (100-200) and large (300-500) graphs.

    Models alternate between preferential attachment and its triad-closing variant.
    """
    rng = make_rng(rng_seed)
    out = []
    for i in range(n_small + n_large):
        lo, hi = (100, 200) if i < n_small else (300, 500)
        model = "barabasi-albert" if i % 2 == 0 else "holme-kim"
        out.append(GeneratorConfig(model, int(rng.integers(lo, hi + 1)), m, 0.5,
                                   int(rng.integers(0, 2**31 - 1))))
    return out


def save_dataset(ds: Dataset, path):
    """JSON-lines, one sample per line, each referencing its graph file by path."""
    if ds.paths is None:
        raise ValidationError("dataset graphs have no file paths; save the graphs first")
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        for s in ds.samples:
            fh.write(json.dumps({"graph": ds.paths[s.graph_id], "graph_id": s.graph_id,
                                 "seeds": list(s.seeds), "label": s.label,
                                 "split": ds.split_of[s.graph_id]}) + "\n")


def load_dataset(path) -> Dataset:
    path = os.fspath(path)
    base = os.path.dirname(os.path.abspath(path))
    graphs, paths, samples, split_of = {}, {}, [], {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                gid = int(row["graph_id"])
                sample = TrainingSample(gid, tuple(int(v) for v in row["seeds"]), float(row["label"]))
                gpath, split = row["graph"], row["split"]
            except (ValueError, KeyError, TypeError) as exc:
                raise ValidationError(f"{path}:{lineno}: malformed sample ({exc})") from None
            if split not in SPLITS:
                raise ValidationError(f"{path}:{lineno}: unknown split {split!r}")
            if gid not in graphs:
                full = gpath if os.path.isabs(gpath) else os.path.join(base, gpath)
                if not os.path.exists(full) and os.path.exists(gpath):
                    full = gpath
                graphs[gid] = load_graph(full)
                paths[gid] = gpath
            split_of[gid] = split
            samples.append(sample)
    ids = sorted(graphs)
    if ids != list(range(len(ids))):
        raise ValidationError(f"{path}: graph ids must be 0..{len(ids) - 1}")
    return Dataset([graphs[i] for i in ids], samples, split_of, [paths[i] for i in ids])
