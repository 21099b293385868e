"""Q-learning seed selector on top of a frozen spread estimator.

A candidate ``s`` given the current seed set ``S`` is described by three
numbers: the estimate of ``S``, the estimate of ``{s}`` alone, and an overlap
count between their predicted influence sets.  Each is put on a unit scale
(node count, best single-node estimate, size of the set's influence set) so
one network transfers across graph sizes.  The Q-network is
``ReLU(ReLU(f W_k) W_q)``.  Training plays fixed-length games, stores 2-step
undiscounted returns in a replay buffer and fits double-Q targets (online
net picks the next action, a periodically synced target net scores it).
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SchemaError, VersionError
from .glie import GlieEstimator
from .graph import DirectedGraph, make_rng
from .maximize import MaximizeResult, _Timer, filter_candidates
from .optim import Adam

FORMAT_VERSION = 1


@dataclass
class GrimConfig:
    hid: int = 16
    episodes: int = 500
    seeds_per_game: int = 100
    epsilon: float = 0.3
    epsilon_decay: float = 0.99
    capacity: int = 10_000
    batch_size: int = 64
    sync_every: int = 100
    lr: float = 1e-3
    n_step: int = 2
    candidates: str = "mean"
    rng_seed: int = 0

    def __post_init__(self):
        if self.hid < 1 or self.episodes < 0 or self.seeds_per_game < 1:
            raise ConfigError("hid and seeds_per_game must be positive")
        if not 0.0 <= self.epsilon <= 1.0 or not 0.0 < self.epsilon_decay <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1] and epsilon_decay in (0, 1]")
        if self.capacity < 1 or self.batch_size < 1 or self.sync_every < 1 or self.n_step < 1:
            raise ConfigError("capacity, batch_size, sync_every and n_step must be positive")


@dataclass
class QNet:
    W_k: np.ndarray
    W_q: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def hid(self) -> int:
        return self.W_k.shape[1]

    @classmethod
    def init(cls, hid=16, rng=None):
        rng = make_rng(0) if rng is None else rng
        W_k = rng.uniform(-1.0, 1.0, (3, hid)) / math.sqrt(3)
        # positive output weights keep the last ReLU alive at the start
        W_q = rng.uniform(0.0, 1.0, (hid, 1)) / math.sqrt(hid)
        return cls(W_k, W_q)

    def q(self, feats: np.ndarray) -> np.ndarray:
        return np.maximum(np.maximum(feats @ self.W_k, 0.0) @ self.W_q, 0.0)[:, 0]

    def copy(self) -> "QNet":
        return QNet(self.W_k.copy(), self.W_q.copy(), dict(self.info))

    def grads(self, feats, target):
        """MSE loss and its gradients w.r.t. ``(W_k, W_q)``."""
        h = np.maximum(feats @ self.W_k, 0.0)
        out = (h @ self.W_q)[:, 0]
        q = np.maximum(out, 0.0)
        err = q - target
        dq = (2.0 / err.size) * err * (out > 0)
        gW_q = h.T @ dq[:, None]
        dh = (dq[:, None] @ self.W_q.T) * (h > 0)
        return float(np.mean(err * err)), [feats.T @ dh, gW_q]


def save_qnet(net: QNet, path):
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump({"version": FORMAT_VERSION, "hid": net.hid, "W_k": net.W_k.tolist(),
                   "W_q": net.W_q.tolist()}, fh)
        fh.write("\n")


def load_qnet(path) -> QNet:
    try:
        with open(os.fspath(path), "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(obj, dict) or "version" not in obj:
        raise SchemaError("missing version field")
    if obj["version"] != FORMAT_VERSION:
        raise VersionError(f"q-net format version {obj['version']}, expected {FORMAT_VERSION}")
    try:
        W_k = np.array(obj["W_k"], dtype=np.float64)
        W_q = np.array(obj["W_q"], dtype=np.float64)
        hid = int(obj["hid"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed q-net: {exc}") from None
    if W_k.shape != (3, hid) or W_q.shape != (hid, 1):
        raise SchemaError("q-net weight shapes do not match hid")
    return QNet(W_k, W_q)


def choose_action(net: QNet, feats: np.ndarray, epsilon: float, rng) -> int:
    """Epsilon-greedy row index; greedy ties go to the first row."""
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(feats.shape[0]))
    return int(np.argmax(net.q(feats)))


class Game:
    """Sequential selection state on one graph.

    The first move scores every candidate alone (one forward each) and
    keeps their influence sets; each later move costs one forward, for the
    grown seed set.
    """

    def __init__(self, g: DirectedGraph, model, candidates="mean"):
        self.g = g
        self.est = GlieEstimator(model, g)
        cand = filter_candidates(g, candidates) if isinstance(candidates, str) else np.asarray(candidates)
        self.cand = np.asarray(cand, dtype=np.int64)
        self.single, self.single_sets = self.est.predict_with_sets([[int(v)] for v in self.cand])
        i = int(np.argmax(self.single))
        self.top = max(float(self.single[i]), 1e-12)
        self.seeds = [int(self.cand[i])]
        self.sigma = float(self.single[i])
        self.sets = self.single_sets[i]
        self.open = np.ones(self.cand.size, dtype=bool)
        self.open[i] = False

    def features(self):
        """Rows of open candidates and their positions in ``self.cand``."""
        idx = np.flatnonzero(self.open)
        n = self.g.n
        overlap = (self.single_sets[idx] >= self.sets[None, :]).sum(axis=1)
        # n - overlap counts nodes predicted for S but not for s
        missed = (n - overlap) / max(1.0, float(self.sets.sum()))
        f = np.column_stack([np.full(idx.size, self.sigma / n), self.single[idx] / self.top, missed])
        return f, idx

    def play(self, pos: int) -> float:
        """Add candidate ``pos``; returns the estimated marginal gain."""
        self.open[pos] = False
        self.seeds.append(int(self.cand[pos]))
        sig, sets = self.est.predict_with_sets([self.seeds])
        gain = float(sig[0]) - self.sigma
        self.sigma, self.sets = float(sig[0]), sets[0]
        return gain

    @property
    def done(self) -> bool:
        return not self.open.any()


class Replay:
    def __init__(self, capacity, rng):
        self.capacity, self.rng = capacity, rng
        self.items = []
        self.pos = 0

    def add(self, item):
        if len(self.items) < self.capacity:
            self.items.append(item)
        else:
            self.items[self.pos] = item
        self.pos = (self.pos + 1) % self.capacity

    def __len__(self):
        return len(self.items)

    def sample(self, size):
        idx = self.rng.integers(len(self.items), size=size)
        return [self.items[i] for i in idx]


def _targets(online: QNet, target: QNet, batch) -> np.ndarray:
    y = np.empty(len(batch))
    for j, (_, ret, nxt) in enumerate(batch):
        y[j] = ret
        if nxt is not None and nxt.shape[0]:
            a = int(np.argmax(online.q(nxt)))
            y[j] += float(target.q(nxt[a:a + 1])[0])
    return y


def grim_train(train_graphs, model, cfg: GrimConfig | None = None, log=None) -> QNet:
    """Learn a Q-network by playing ``cfg.episodes`` rounds of one game per training graph.

    Rewards are marginal gains of the frozen estimator divided by the node
    count.  Keeps the network whose episode reached the best mean final
    estimate over the training graphs.
    """
    cfg = GrimConfig() if cfg is None else cfg
    rng = make_rng(cfg.rng_seed)
    online = QNet.init(cfg.hid, rng)
    target = online.copy()
    opt = Adam([online.W_k, online.W_q], lr=cfg.lr)
    replay = Replay(cfg.capacity, rng)
    eps = cfg.epsilon
    best, best_score, updates = online.copy(), -math.inf, 0
    history = []
    for episode in range(cfg.episodes):
        finals = []
        for g in train_graphs:
            game = Game(g, model, cfg.candidates)
            n = float(g.n)
            feats, rewards, states = [], [], []
            steps = min(cfg.seeds_per_game, game.cand.size) - 1
            for _ in range(steps):
                f, idx = game.features()
                a = choose_action(online, f, eps, rng)
                states.append(f)
                feats.append(f[a])
                rewards.append(game.play(int(idx[a])) / n)
            states.append(game.features()[0] if not game.done else None)
            T = len(rewards)
            for t in range(T):
                end = min(t + cfg.n_step, T)
                nxt = states[end] if end < T else None
                replay.add((feats[t], float(sum(rewards[t:end])), nxt))
                if len(replay) >= cfg.batch_size:
                    batch = replay.sample(cfg.batch_size)
                    y = _targets(online, target, batch)
                    _, grads = online.grads(np.array([b[0] for b in batch]), y)
                    opt.step([online.W_k, online.W_q], grads)
                    updates += 1
                    if updates % cfg.sync_every == 0:
                        target = online.copy()
            finals.append(game.sigma)
        score = float(np.mean(finals)) if finals else 0.0
        history.append(score)
        if log is not None:
            log(episode + 1, score, eps)
        if score > best_score:
            best, best_score = online.copy(), score
        eps *= cfg.epsilon_decay
    best.info = {"best_score": best_score, "history": history}
    return best


def grim_select(g: DirectedGraph, k: int, model, qnet: QNet, candidates="mean") -> MaximizeResult:
    """Greedy play of a trained Q-network; ``n_forward`` is ``|candidates| + k - 1``."""
    if k < 0:
        raise ConfigError("k must be non-negative")
    res = MaximizeResult("grim", [])
    if k == 0:
        return res
    timer = _Timer()
    game = Game(g, model, candidates)
    res.seeds = list(game.seeds)
    res.gains.append(game.sigma)
    res.step_ms.append(timer.lap())
    while len(game.seeds) < k and not game.done:
        f, idx = game.features()
        res.gains.append(game.play(int(idx[int(np.argmax(qnet.q(f)))])))
        res.step_ms.append(timer.lap())
    res.seeds = list(game.seeds)
    res.n_forward = game.est.n_forward
    return res
