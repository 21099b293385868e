"""Metrics, empirical set-function checks, scaling smoke runs and experiment reports."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, ValidationError
from .graph import DirectedGraph, check_seeds, graph_from_spec, make_rng
from .simulate import simulate_ic

CSV_HEADER = ["graph", "method", "k", "spread_mean", "spread_stderr", "time_s", "mae", "rel_err"]


def mae_relative(preds, labels) -> float:
    """Mean absolute error divided by the mean label."""
    p = np.asarray(preds, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.size == 0 or p.shape != y.shape:
        raise DomainError("need equally long, non-empty prediction and label lists")
    mean = y.mean()
    if mean == 0:
        raise DomainError("mean label is zero")
    return float(np.abs(p - y).mean() / mean)


@dataclass
class PropertySeries:
    m_ss: np.ndarray   # gain of the next chosen seed
    m_sr: np.ndarray   # gain of the next random node
    s_ss: np.ndarray   # gain drop of a fixed chosen seed between consecutive prefixes
    s_sr: np.ndarray   # same for a fixed random node

    def as_dict(self) -> dict:
        return {k: [float(x) for x in v] for k, v in asdict(self).items()}

    def min(self, names=("m_ss", "m_sr", "s_ss", "s_sr")) -> float:
        return min(float(getattr(self, k).min()) for k in names if getattr(self, k).size)


def check_monotone_submodular(estimate, trajectory, random_seq, rng_seed=0) -> PropertySeries:
    """Marginal-gain series of a set function along a selection trajectory.

    ``estimate`` maps a node list to a value (e.g. ``GlieEstimator.predict``).
    With ``S_j`` the first ``j`` trajectory nodes (``j = 0..k-1``):
    ``m_ss[j] = f(S_j + s_{j+1}) - f(S_j)`` and ``m_sr`` likewise with the
    random node ``r_{j+1}``.  For one fixed trajectory node ``x`` and one fixed
    random node ``y`` (sampled once), ``s_ss[j] = gain(x | S_{j-1}) - gain(x | S_j)``
    for ``j = 1..k-1``, and ``s_sr`` likewise with ``y``.
    """
    traj = [int(v) for v in trajectory]
    rand = [int(v) for v in random_seq]
    if len(traj) != len(rand):
        raise ValidationError("trajectory and random sequence differ in length")
    k = len(traj)
    if k == 0:
        z = np.zeros(0)
        return PropertySeries(z, z, z, z)
    rng = make_rng(rng_seed)
    x = traj[int(rng.integers(k))]
    y = rand[int(rng.integers(k))]
    cache = {}

    def f(nodes):
        key = frozenset(nodes)
        if key not in cache:
            cache[key] = float(estimate(sorted(key)))
        return cache[key]

    def gain(node, j):
        base = traj[:j]
        return f(base + [node]) - f(base) if node not in base else 0.0

    m_ss = np.array([gain(traj[j], j) for j in range(k)])
    m_sr = np.array([gain(rand[j], j) for j in range(k)])
    s_ss = np.array([gain(x, j - 1) - gain(x, j) for j in range(1, k)])
    s_sr = np.array([gain(y, j - 1) - gain(y, j) for j in range(1, k)])
    return PropertySeries(m_ss, m_sr, s_ss, s_sr)


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def scaling_smoke(graphs, k, model, aff_interval=5, repeats=3) -> dict:
    """Wall time of the influence-set heuristic per graph and the log-log slope against |E|."""
    from .maximize import pun

    if len(graphs) < 3:
        raise ConfigError("need at least three graph sizes")
    edges, times = [], []
    for g in graphs:
        best = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            pun(g, k, model, aff_interval)
            best = min(best, time.perf_counter() - t0)
        edges.append(g.n_edges)
        times.append(best)
    return {"edges": edges, "time_s": times, "slope": loglog_slope(edges, times)}


def relative_error_protocol(g: DirectedGraph, model, size, n_random=9, n_sims=10_000,
                            rng_seed=0) -> dict:
    """Estimator error on ``n_random`` random seed sets plus the top-degree set of equal size."""
    from .glie import GlieEstimator

    if not 1 <= size <= g.n:
        raise DomainError(f"seed set size must lie in [1, {g.n}]")
    rng = make_rng(rng_seed)
    sets = [np.sort(rng.choice(g.n, size=size, replace=False)) for _ in range(n_random)]
    sets.append(np.sort(np.lexsort((np.arange(g.n), -g.out_degree))[:size]))
    preds = GlieEstimator(model, g).predict_many(sets)
    labels = np.array([simulate_ic(g, s, n_sims, rng_seed).mean for s in sets])
    return {"size": size, "preds": preds.tolist(), "labels": labels.tolist(),
            "rel_err": mae_relative(preds, labels)}


# ----------------------------------------------------------------- experiments

@dataclass
class ReportRow:
    graph: str
    method: str
    k: int
    spread_mean: float
    spread_stderr: float
    time_s: float
    mae: float = math.nan
    rel_err: float = math.nan


def _fmt(x) -> str:
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_HEADER])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, config=None) -> "ExperimentReport":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValidationError(f"unexpected report header {header}")
        rows = []
        for rec in reader:
            if not rec:
                continue
            num = [float(v) if v != "" else math.nan for v in rec[3:]]
            rows.append(ReportRow(rec[0], rec[1], int(rec[2]), *num))
        return cls(rows, dict(config or {}))

    def to_json(self) -> dict:
        rows = [{k: (None if isinstance(v, float) and math.isnan(v) else v)
                 for k, v in asdict(r).items()} for r in self.rows]
        return {"config": self.config, "rows": rows}

    def __eq__(self, other):
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        return self.to_csv() == other.to_csv()


def select(g, method, k, model=None, qnet=None, n_sims=1000, rng_seed=0, aff_interval=5,
           candidates="mean"):
    from . import maximize

    if method == "celf-mc":
        return maximize.celf_mc(g, k, n_sims, rng_seed, maximize.filter_candidates(g, candidates))
    if method == "degdisc":
        return maximize.degree_discount(g, k)
    if method == "kcore":
        return maximize.k_core(g, k)
    if model is None:
        raise ConfigError(f"method {method!r} needs a trained estimator")
    if method == "celf-glie":
        return maximize.celf_glie(g, k, model, candidates)
    if method == "pun":
        return maximize.pun(g, k, model, aff_interval)
    if method == "grim":
        if qnet is None:
            raise ConfigError("method 'grim' needs a q-network")
        from .grim import grim_select
        return grim_select(g, k, model, qnet, candidates)
    raise ConfigError(f"unknown method {method!r}")


def run_experiment(config: dict, timing=True) -> ExperimentReport:
    """Select and evaluate seeds for every (graph, method, k) of ``config``.

    Keys: ``graphs`` (paths or generator dicts, optionally with ``name``),
    ``methods``, ``budgets``, ``eval_sims`` (10000), ``select_sims`` (1000),
    ``seed``, ``model`` and ``qnet`` paths.  Time covers selection only.
    With ``timing=False`` times are reported as 0 so reports are byte-stable.
    """
    from .glie import GlieEstimator, load_model
    from .grim import load_qnet

    if not isinstance(config, dict):
        raise ConfigError("experiment config must be a JSON object")
    methods = list(config.get("methods", []))
    budgets = [int(k) for k in config.get("budgets", [20])]
    eval_sims = int(config.get("eval_sims", 10_000))
    select_sims = int(config.get("select_sims", 1000))
    seed = int(config.get("seed", 42))
    model = load_model(config["model"]) if config.get("model") else None
    qnet = load_qnet(config["qnet"]) if config.get("qnet") else None
    report = ExperimentReport([], dict(config))
    if not methods:
        return report
    for gi, spec in enumerate(config.get("graphs", [])):
        name = spec.get("name") if isinstance(spec, dict) else None
        if name is None:
            name = os.path.basename(spec) if isinstance(spec, str) else spec.get("path", f"g{gi}")
            name = os.path.basename(name) if isinstance(name, str) else name
        g = graph_from_spec(spec)
        est = GlieEstimator(model, g) if model is not None else None
        for method in methods:
            for k in budgets:
                t0 = time.perf_counter()
                res = select(g, method, k, model, qnet, select_sims, seed,
                             int(config.get("aff_interval", 5)), config.get("candidates", "mean"))
                dt = time.perf_counter() - t0 if timing else 0.0
                seeds = check_seeds(g, res.seeds)
                if seeds.size == 0:
                    mc_mean, mc_se = 0.0, 0.0
                else:
                    mc = simulate_ic(g, seeds, eval_sims, seed)
                    mc_mean, mc_se = mc.mean, mc.std_err
                mae = rel = math.nan
                if est is not None and seeds.size:
                    mae = abs(est.predict(seeds) - mc_mean)
                    rel = mae / mc_mean
                report.rows.append(ReportRow(str(name), method, k, mc_mean, mc_se, dt, mae, rel))
    return report


def load_config(path) -> dict:
    with open(os.fspath(path), "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
