"""Message-passing spread estimator.

Layer ``t`` maps node states ``H`` to ``BN(ReLU([H, A H] W_t))`` followed by
dropout while training.  The graph readout sums every layer's node states
(input features included) and a final linear map with ReLU gives the
predicted spread.  Inputs are seed indicators replicated over ``feat_dim``
columns.

Training runs several samples at once as a disjoint union of their graphs:
message passing stays inside each graph, batchnorm statistics are taken
over all nodes of the union, and readout sums per graph.
"""
from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ModelError, SchemaError, TrainingError, VersionError
from .graph import DirectedGraph, check_seeds, make_rng
from .optim import Adam

FORMAT_VERSION = 1
BN_MOMENTUM = 0.1
BN_EPS = 1e-5


@dataclass
class GlieConfig:
    feat_dim: int = 50
    layer_widths: tuple = (32, 16)
    dropout: float = 0.4
    lr: float = 0.01
    epochs: int = 100
    patience: int = 50
    batch_size: int = 64
    rng_seed: int = 0

    def __post_init__(self):
        self.layer_widths = tuple(int(w) for w in self.layer_widths)
        if self.feat_dim < 1 or not self.layer_widths or min(self.layer_widths) < 1:
            raise ConfigError("feat_dim and layer widths must be positive")
        if any(b > a for a, b in zip(self.layer_widths, self.layer_widths[1:])):
            raise ConfigError(f"layer widths must be non-increasing, got {self.layer_widths}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.lr <= 0 or self.epochs < 1 or self.patience < 1 or self.batch_size < 1:
            raise ConfigError("lr, epochs, patience and batch_size must be positive")


@dataclass
class Layer:
    W: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass
class GlieModel:
    config: GlieConfig
    layers: list
    W_o: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def widths(self):
        return [self.config.feat_dim] + [L.W.shape[1] for L in self.layers]

    @property
    def readout_width(self):
        return sum(self.widths)

    def params(self):
        out = []
        for L in self.layers:
            out += [L.W, L.gamma, L.beta]
        out.append(self.W_o)
        return out

    def copy(self) -> "GlieModel":
        return copy.deepcopy(self)

    def check(self):
        in_w = self.config.feat_dim
        for i, L in enumerate(self.layers):
            w = L.W.shape[1]
            if L.W.shape != (2 * in_w, w):
                raise ModelError(f"layer {i}: W has shape {L.W.shape}, expected {(2 * in_w, w)}")
            for name in ("gamma", "beta", "running_mean", "running_var"):
                if getattr(L, name).shape != (w,):
                    raise ModelError(f"layer {i}: {name} shape mismatch")
            if np.any(L.running_var <= 0):
                raise ModelError(f"layer {i}: running_var must be positive")
            in_w = w
        if self.W_o.shape != (self.readout_width, 1):
            raise ModelError(f"W_o has shape {self.W_o.shape}, expected {(self.readout_width, 1)}")


def init_model(cfg: GlieConfig, rng=None) -> GlieModel:
    """Uniform fan-in initialisation, identity batchnorm; output weights start non-negative."""
    rng = make_rng(cfg.rng_seed) if rng is None else rng
    layers = []
    in_w = cfg.feat_dim
    for w in cfg.layer_widths:
        bound = 1.0 / math.sqrt(2 * in_w)
        layers.append(Layer(rng.uniform(-bound, bound, (2 * in_w, w)), np.ones(w), np.zeros(w),
                            np.zeros(w), np.ones(w)))
        in_w = w
    D = cfg.feat_dim + sum(cfg.layer_widths)
    # a negative start would leave the output ReLU dead for every sample
    W_o = rng.uniform(0.0, 1.0 / math.sqrt(D), (D, 1))
    return GlieModel(cfg, layers, W_o)


def encode_seeds(g: DirectedGraph, seeds, d: int) -> np.ndarray:
    s = check_seeds(g, seeds)
    X = np.zeros((g.n, d))
    X[s] = 1.0
    return X


# ------------------------------------------------------------- batched forward

@dataclass
class Batch:
    A: sp.csr_matrix
    X: np.ndarray
    P: sp.csr_matrix
    y: np.ndarray


def _stack_csr(mats):
    offs = np.cumsum([0] + [m.shape[0] for m in mats])
    nnz = np.cumsum([0] + [m.nnz for m in mats])
    data = np.concatenate([m.data for m in mats])
    indices = np.concatenate([m.indices + o for m, o in zip(mats, offs[:-1])])
    indptr = np.concatenate([[0]] + [m.indptr[1:] + z for m, z in zip(mats, nnz[:-1])])
    N = int(offs[-1])
    return sp.csr_matrix((data, indices, indptr), shape=(N, N)), offs


def make_batch(graphs, seed_sets, labels, d: int) -> Batch:
    A, offs = _stack_csr([g.A for g in graphs])
    N = int(offs[-1])
    X = np.zeros((N, d))
    for o, g, s in zip(offs, graphs, seed_sets):
        X[o + check_seeds(g, s)] = 1.0
    seg = np.repeat(np.arange(len(graphs)), np.diff(offs))
    P = sp.csr_matrix((np.ones(N), (seg, np.arange(N))), shape=(len(graphs), N))
    return Batch(A, X, P, np.asarray(labels, dtype=np.float64))


def forward_batch(model: GlieModel, batch: Batch, train=False, rng=None, batch_stats=None):
    """Predicted spread of every graph in ``batch`` plus the cache needed for backprop.

    ``batch_stats`` selects batchnorm statistics from the batch (default: when
    training) instead of the running averages.
    """
    batch_stats = train if batch_stats is None else batch_stats
    drop = model.config.dropout if train else 0.0
    if drop > 0 and rng is None:
        raise ModelError("dropout needs an rng")
    H = batch.X
    Hs = [H]
    caches = []
    for L in model.layers:
        if H.shape[1] * 2 != L.W.shape[0]:
            raise ModelError("input width does not match layer weights")
        C = np.concatenate([H, batch.A @ H], axis=1)
        Z = C @ L.W
        R = np.maximum(Z, 0.0)
        if batch_stats:
            mu, var = R.mean(axis=0), R.var(axis=0)
        else:
            mu, var = L.running_mean, L.running_var
        inv = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (R - mu) * inv
        H = L.gamma * xhat + L.beta
        mask = None
        if drop > 0:
            mask = (rng.random(H.shape) >= drop) / (1.0 - drop)
            H = H * mask
        caches.append((C, Z, xhat, inv, mask, mu, var))
        Hs.append(H)
    G = batch.P @ np.concatenate(Hs, axis=1)
    out = (G @ model.W_o)[:, 0]
    return np.maximum(out, 0.0), {"Hs": Hs, "caches": caches, "G": G, "out": out,
                                  "batch_stats": batch_stats}


def backward_batch(model: GlieModel, batch: Batch, cache, dsigma):
    """Gradients of ``sum(dsigma * sigma)`` w.r.t. ``model.params()``, same order."""
    dout = np.asarray(dsigma, dtype=np.float64) * (cache["out"] > 0)
    gW_o = cache["G"].T @ dout[:, None]
    dF = batch.P.T @ (dout[:, None] @ model.W_o.T)
    offs = np.cumsum([0] + model.widths)
    grads = [None] * (3 * len(model.layers))
    T = len(model.layers)
    dH = dF[:, offs[T]:offs[T + 1]]
    AT = None
    for t in range(T - 1, -1, -1):
        L = model.layers[t]
        C, Z, xhat, inv, mask, _, _ = cache["caches"][t]
        dY = dH if mask is None else dH * mask
        dgamma = (dY * xhat).sum(axis=0)
        dbeta = dY.sum(axis=0)
        dxhat = dY * L.gamma
        if cache["batch_stats"]:
            N = dxhat.shape[0]
            dR = (inv / N) * (N * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        else:
            dR = dxhat * inv
        dZ = dR * (Z > 0)
        grads[3 * t:3 * t + 3] = [C.T @ dZ, dgamma, dbeta]
        if t > 0:
            in_w = C.shape[1] // 2
            dC = dZ @ L.W.T
            if AT is None:
                AT = batch.A.T.tocsr()
            dH = dC[:, :in_w] + AT @ dC[:, in_w:] + dF[:, offs[t]:offs[t + 1]]
    return grads + [gW_o]


def _update_running(model, cache):
    N = cache["Hs"][0].shape[0]
    for L, (_, _, _, _, _, mu, var) in zip(model.layers, cache["caches"]):
        L.running_mean *= 1.0 - BN_MOMENTUM
        L.running_mean += BN_MOMENTUM * mu
        L.running_var *= 1.0 - BN_MOMENTUM
        L.running_var += BN_MOMENTUM * var * (N / max(N - 1, 1))


def forward(model: GlieModel, g: DirectedGraph, seeds, mode="infer", rng=None):
    """Single-graph forward; returns ``(sigma_hat, [H_0, ..., H_T])``."""
    if mode not in ("train", "infer"):
        raise ModelError(f"unknown mode {mode!r}")
    model.check()
    batch = make_batch([g], [seeds], [0.0], model.config.feat_dim)
    sigma, cache = forward_batch(model, batch, train=(mode == "train"), rng=rng)
    return float(sigma[0]), cache["Hs"]


# ------------------------------------------------------------ fast inference

@dataclass
class InfluenceSets:
    multi: np.ndarray          # influenced according to all layers
    uninfluenced: np.ndarray   # first-layer prediction, complement of ``influenced``
    influenced: np.ndarray     # first-layer prediction, seeds forced in
    gains: np.ndarray          # probability-weighted count of uninfluenced out-neighbours
    sigma: float

    @property
    def size(self) -> int:
        return int(self.influenced.sum())


class GlieEstimator:
    """Inference-mode evaluator of one model on one graph.

    Evaluates many seed sets at once and counts forward passes (one per
    seed set) in ``n_forward``.  Uses that input columns are identical, so
    the first layer reduces to two rank-1 terms.
    """

    def __init__(self, model: GlieModel, g: DirectedGraph, max_block=4_000_000):
        model.check()
        self.model, self.g = model, g
        self.n_forward = 0
        self.max_block = max_block
        d = model.config.feat_dim
        W0 = model.layers[0].W
        self._w_self, self._w_nbr = W0[:d].sum(axis=0), W0[d:].sum(axis=0)
        self._affine = []
        for L in model.layers:
            scale = L.gamma / np.sqrt(L.running_var + BN_EPS)
            self._affine.append((scale, L.beta - L.running_mean * scale))
        offs = np.cumsum([0] + model.widths)
        wo = model.W_o[:, 0]
        self._wo_seed = wo[:d].sum()
        self._wo_layers = [wo[offs[t + 1]:offs[t + 2]] for t in range(len(model.layers))]
        self._width = max(model.widths[1:])

    def _layers(self, seed_sets):
        n, A = self.g.n, self.g.A
        B = len(seed_sets)
        S = np.zeros((n, B))
        for j, s in enumerate(seed_sets):
            S[np.asarray(s, dtype=np.int64), j] = 1.0
        AS = A @ S
        Z = S[:, :, None] * self._w_self + AS[:, :, None] * self._w_nbr
        scale, shift = self._affine[0]
        H = np.maximum(Z, 0.0) * scale + shift
        Hs = [H]
        for L, (scale, shift) in zip(self.model.layers[1:], self._affine[1:]):
            w = H.shape[2]
            AH = (A @ H.reshape(n, B * w)).reshape(n, B, w)
            Z = H @ L.W[:w] + AH @ L.W[w:]
            H = np.maximum(Z, 0.0) * scale + shift
            Hs.append(H)
        self.n_forward += B
        return Hs

    def _sigma(self, sizes, Hs):
        out = sizes * self._wo_seed
        for H, wo in zip(Hs, self._wo_layers):
            out = out + H.sum(axis=0) @ wo
        return np.maximum(out, 0.0)

    def _blocks(self, seed_sets):
        step = max(1, self.max_block // max(1, self.g.n * self._width))
        for i in range(0, len(seed_sets), step):
            yield seed_sets[i:i + step]

    def predict_many(self, seed_sets) -> np.ndarray:
        seed_sets = [check_seeds(self.g, s) for s in seed_sets]
        out = []
        for block in self._blocks(seed_sets):
            Hs = self._layers(block)
            out.append(self._sigma(np.array([s.size for s in block], dtype=np.float64), Hs))
        return np.concatenate(out) if out else np.zeros(0)

    def predict(self, seeds) -> float:
        return float(self.predict_many([seeds])[0])

    def predict_with_sets(self, seed_sets):
        """Spread predictions and multi-layer influence indicators, shape ``(B, n)``."""
        seed_sets = [check_seeds(self.g, s) for s in seed_sets]
        sig, multi = [], []
        for block in self._blocks(seed_sets):
            Hs = self._layers(block)
            sig.append(self._sigma(np.array([s.size for s in block], dtype=np.float64), Hs))
            multi.append((sum(H.mean(axis=2) for H in Hs) >= 0.0).T)
        if not sig:
            return np.zeros(0), np.zeros((0, self.g.n), dtype=bool)
        return np.concatenate(sig), np.concatenate(multi, axis=0)

    def influence_sets(self, seeds) -> InfluenceSets:
        s = check_seeds(self.g, seeds)
        Hs = self._layers([s])
        sigma = float(self._sigma(np.array([float(s.size)]), Hs)[0])
        multi = sum(H[:, 0, :].mean(axis=1) for H in Hs) >= 0.0
        influenced = Hs[0][:, 0, :].sum(axis=1) > 0.0
        influenced[s] = True
        uninfluenced = ~influenced
        gains = self.g.AT @ uninfluenced.astype(np.float64)
        gains[s] = 0.0
        return InfluenceSets(multi, uninfluenced, influenced, gains, sigma)


def extract_influence_sets(model: GlieModel, g: DirectedGraph, seeds) -> InfluenceSets:
    return GlieEstimator(model, g).influence_sets(seeds)


# -------------------------------------------------------------------- training

def predict_samples(model: GlieModel, dataset, samples, chunk=256) -> np.ndarray:
    out = []
    d = model.config.feat_dim
    for i in range(0, len(samples), chunk):
        part = samples[i:i + chunk]
        b = make_batch([dataset.graphs[s.graph_id] for s in part], [s.seeds for s in part],
                       [s.label for s in part], d)
        out.append(forward_batch(model, b, train=False)[0])
    return np.concatenate(out) if out else np.zeros(0)


def train(cfg: GlieConfig, dataset, log=None) -> GlieModel:
    """Least-squares regression of spread labels with Adam and early stopping.

    Returns the parameters with the lowest validation MSE; ``model.info``
    holds ``best_epoch``, ``best_val_mse`` and the per-epoch history.
    """
    train_s, val_s = dataset.split("train"), dataset.split("val")
    if not train_s or not val_s:
        raise ConfigError("training needs non-empty train and val splits")
    rng = make_rng(cfg.rng_seed)
    model = init_model(cfg, rng)
    params = model.params()
    opt = Adam(params, lr=cfg.lr)
    d = cfg.feat_dim
    val_y = np.array([s.label for s in val_s])
    best, best_val, best_epoch, wait = None, math.inf, 0, 0
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_s))
        sq, count = 0.0, 0
        for b0 in range(0, len(order), cfg.batch_size):
            part = [train_s[i] for i in order[b0:b0 + cfg.batch_size]]
            batch = make_batch([dataset.graphs[s.graph_id] for s in part], [s.seeds for s in part],
                               [s.label for s in part], d)
            sigma, cache = forward_batch(model, batch, train=True, rng=rng)
            err = sigma - batch.y
            loss = float(np.mean(err * err))
            if not math.isfinite(loss):
                raise TrainingError(epoch)
            grads = backward_batch(model, batch, cache, 2.0 * err / err.size)
            _update_running(model, cache)
            opt.step(params, grads)
            sq += loss * err.size
            count += err.size
        val = float(np.mean((predict_samples(model, dataset, val_s) - val_y) ** 2))
        if not math.isfinite(val):
            raise TrainingError(epoch, "validation loss is not finite")
        history.append({"epoch": epoch, "train_mse": sq / count, "val_mse": val})
        if log is not None:
            log(epoch, sq / count, val)
        if val < best_val:
            best, best_val, best_epoch, wait = model.copy(), val, epoch, 0
        else:
            wait += 1
            if wait >= cfg.patience:
                break
    best.info = {"best_epoch": best_epoch, "best_val_mse": best_val, "history": history}
    return best


# --------------------------------------------------------------- serialisation

def model_to_dict(model: GlieModel) -> dict:
    cfg = asdict(model.config)
    cfg["layer_widths"] = list(cfg["layer_widths"])
    return {
        "version": FORMAT_VERSION,
        "config": cfg,
        "layers": [{"W": L.W.tolist(), "gamma": L.gamma.tolist(), "beta": L.beta.tolist(),
                    "running_mean": L.running_mean.tolist(), "running_var": L.running_var.tolist()}
                   for L in model.layers],
        "W_o": model.W_o.tolist(),
    }


def model_from_dict(obj) -> GlieModel:
    if not isinstance(obj, dict):
        raise SchemaError("model file must hold a JSON object")
    if "version" not in obj:
        raise SchemaError("missing version field")
    if obj["version"] != FORMAT_VERSION:
        raise VersionError(f"model format version {obj['version']}, expected {FORMAT_VERSION}")
    for key in ("config", "layers", "W_o"):
        if key not in obj:
            raise SchemaError(f"missing {key!r}")
    try:
        cfg = GlieConfig(**obj["config"])
        layers = [Layer(*(np.array(L[k], dtype=np.float64) for k in
                          ("W", "gamma", "beta", "running_mean", "running_var")))
                  for L in obj["layers"]]
        W_o = np.array(obj["W_o"], dtype=np.float64)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed model: {exc}") from None
    model = GlieModel(cfg, layers, W_o)
    model.check()
    return model


def save_model(model: GlieModel, path):
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path) -> GlieModel:
    try:
        with open(os.fspath(path), "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(obj)
