import json

import numpy as np
import pytest
from scipy.stats import chisquare

from glim.errors import ConfigError, SchemaError, VersionError
from glim.graph import GeneratorConfig, generate, make_rng
from glim.grim import (Game, GrimConfig, QNet, choose_action, grim_select, grim_train, load_qnet,
                       save_qnet)
from glim.glie import GlieEstimator
from glim.maximize import celf_glie, filter_candidates


@pytest.fixture(scope="module")
def graph():
    return generate(GeneratorConfig(n=120, m=3, rng_seed=14))


def test_full_exploration_is_uniform():
    net = QNet.init(4, make_rng(0))
    feats = make_rng(1).uniform(size=(10, 3))
    rng = make_rng(2)
    draws = [choose_action(net, feats, 1.0, rng) for _ in range(1000)]
    assert chisquare(np.bincount(draws, minlength=10)).pvalue > 0.01


def test_exploration_inside_games_is_uniform(small_model, graph):
    model, _ = small_model
    counts = np.zeros(filter_candidates(graph).size, dtype=int)
    rng = make_rng(5)
    net = QNet.init(4, rng)
    game = Game(graph, model)
    f, idx = game.features()
    for _ in range(1000):
        counts[idx[choose_action(net, f, 1.0, rng)]] += 1
    open_counts = counts[game.open]
    assert counts[~game.open].sum() == 0
    assert chisquare(open_counts).pvalue > 0.01


def single_estimate_net():
    # Q reads only the single-node estimate feature
    return QNet(np.array([[0.0], [1.0], [0.0]]), np.array([[1.0]]))


def test_greedy_single_feature_net_is_static_ranking(small_model, graph):
    model, _ = small_model
    cand = filter_candidates(graph)
    single = GlieEstimator(model, graph).predict_many([[int(v)] for v in cand])
    order = cand[np.lexsort((cand, -single))]
    res = grim_select(graph, 8, model, single_estimate_net())
    assert res.seeds == order[:8].tolist()


@pytest.mark.parametrize("k", [1, 5, 20])
def test_forward_count_contract(small_model, graph, k):
    model, _ = small_model
    res = grim_select(graph, k, model, QNet.init(8, make_rng(k)))
    assert res.n_forward == filter_candidates(graph).size + k - 1
    assert len(set(res.seeds)) == k


def test_first_seed_matches_celf_glie(small_model, graph):
    model, _ = small_model
    assert grim_select(graph, 1, model, QNet.init()).seeds == celf_glie(graph, 1, model).seeds
    assert grim_select(graph, 0, model, QNet.init()).seeds == []


def test_overlap_feature_against_direct_count(small_model, graph):
    model, _ = small_model
    game = Game(graph, model)
    game.play(int(np.flatnonzero(game.open)[0]))
    f, idx = game.features()
    L_S = game.sets
    for row, pos in zip(f, idx):
        missed = int(np.sum(L_S & ~game.single_sets[pos]))
        assert row[2] == pytest.approx(missed / max(1, L_S.sum()))
        assert row[0] == pytest.approx(game.sigma / graph.n)
    assert f[:, 1].max() <= 1.0 + 1e-12


def test_qnet_gradients_match_finite_differences():
    rng = make_rng(3)
    net = QNet.init(5, rng)
    feats = rng.uniform(0, 1, (7, 3))
    target = rng.uniform(0, 1, 7)
    _, grads = net.grads(feats, target)
    h = 1e-6
    for P, G in zip([net.W_k, net.W_q], grads):
        for idx in np.ndindex(P.shape):
            orig = P[idx]
            P[idx] = orig + h
            up = np.mean((net.q(feats) - target) ** 2)
            P[idx] = orig - h
            down = np.mean((net.q(feats) - target) ** 2)
            P[idx] = orig
            assert (up - down) / (2 * h) == pytest.approx(G[idx], abs=1e-6)


def test_training_is_deterministic_and_keeps_best(small_model):
    model, _ = small_model
    graphs = [generate(GeneratorConfig(n=60, m=3, rng_seed=s)) for s in (1, 2)]
    cfg = GrimConfig(hid=4, episodes=3, seeds_per_game=5, batch_size=4, sync_every=3, rng_seed=2)
    a = grim_train(graphs, model, cfg)
    b = grim_train(graphs, model, cfg)
    assert np.array_equal(a.W_k, b.W_k) and np.array_equal(a.W_q, b.W_q)
    assert len(a.info["history"]) == 3 and a.info["best_score"] == max(a.info["history"])


def test_config_validation():
    with pytest.raises(ConfigError):
        GrimConfig(epsilon=1.5)
    with pytest.raises(ConfigError):
        GrimConfig(n_step=0)


def test_qnet_roundtrip_and_errors(tmp_path):
    net = QNet.init(6, make_rng(9))
    save_qnet(net, tmp_path / "q.json")
    back = load_qnet(tmp_path / "q.json")
    assert np.array_equal(back.W_k, net.W_k) and np.array_equal(back.W_q, net.W_q)
    obj = json.loads((tmp_path / "q.json").read_text())
    (tmp_path / "v.json").write_text(json.dumps(dict(obj, version=7)))
    with pytest.raises(VersionError):
        load_qnet(tmp_path / "v.json")
    (tmp_path / "s.json").write_text(json.dumps(dict(obj, hid=2)))
    with pytest.raises(SchemaError):
        load_qnet(tmp_path / "s.json")
