import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glim.errors import ConfigError, ParseError, ValidationError
from glim.graph import (DirectedGraph, GeneratorConfig, assign_weighted_cascade, check_seeds,
                        from_edges, generate, graph_from_spec, load_edge_list, load_graph,
                        save_graph, symmetrize, uniform_ic, write_edge_list)


def test_parse_unweighted():
    g = load_edge_list("0 1\n1 2\n")
    assert g.n == 3 and g.n_edges == 2
    assert np.all(g.p == 0)


def test_parse_weighted():
    g = load_edge_list("0 1 0.5\n", weighted=True)
    assert g.edges == [(0, 1, 0.5)]


def test_parse_rejects_bad_probability():
    with pytest.raises(ValidationError):
        load_edge_list("0 1 1.5\n", weighted=True)


def test_parse_reports_line_number():
    with pytest.raises(ParseError) as exc:
        load_edge_list("# header\n0 1\n2\n")
    assert exc.value.lineno == 3


def test_parse_rejects_duplicates_and_self_loops():
    with pytest.raises(ValidationError):
        load_edge_list("0 1\n0 1\n")
    with pytest.raises(ValidationError):
        load_edge_list("3 3\n")


def test_parse_relabels_densely():
    g = load_edge_list(b"10 30\n30 20\n")
    assert g.n == 3
    assert g.labels == (10, 20, 30)
    assert g.edges == [(0, 2, 0.0), (2, 1, 0.0)]


def test_weighted_cascade_examples():
    star = assign_weighted_cascade(from_edges(4, [(1, 0), (2, 0), (3, 0)]))
    assert np.allclose(star.p, 1 / 3)
    chain = assign_weighted_cascade(from_edges(3, [(0, 1), (1, 2)]))
    assert np.all(chain.p == 1.0)
    four = assign_weighted_cascade(from_edges(5, [(i, 0) for i in range(1, 5)]))
    assert np.allclose(four.p, 0.25) and abs(four.p.sum() - 1) < 1e-12


def test_symmetrize():
    g = symmetrize(from_edges(2, [(0, 1, 0.3)]))
    assert sorted((s, d) for s, d, _ in g.edges) == [(0, 1), (1, 0)]
    assert np.all(g.p == 0)
    again = symmetrize(g)
    assert again.edges == g.edges
    empty = symmetrize(DirectedGraph(3, [], [], []))
    assert empty.n == 3 and empty.n_edges == 0


def test_uniform_ic():
    g = generate(GeneratorConfig(n=6, m=1, rng_seed=1))
    for p in (0.0, 1.0, 0.01):
        assert np.all(uniform_ic(g, p).p == p)
    with pytest.raises(ValueError):
        uniform_ic(g, 1.5)


def test_generate_deterministic():
    a = generate(GeneratorConfig(n=5, m=1, rng_seed=7))
    b = generate(GeneratorConfig(n=5, m=1, rng_seed=7))
    assert a.canonical_bytes() == b.canonical_bytes()


def test_ba_edge_count():
    g = generate(GeneratorConfig("barabasi-albert", n=100, m=2, rng_seed=3))
    assert g.n_edges == 2 * 2 * (100 - 2) == 392


def test_holme_kim_heavy_tail():
    hits = 0
    for seed in range(20):
        g = generate(GeneratorConfig("holme-kim", n=100, m=2, triad_p=0.5, rng_seed=seed))
        deg = g.out_degree
        hits += deg.max() > 2 * deg.mean()
    assert hits == 20


def test_generator_config_validation():
    with pytest.raises(ConfigError):
        GeneratorConfig(n=10, m=0)
    with pytest.raises(ConfigError):
        GeneratorConfig(n=10, m=10)
    with pytest.raises(ConfigError):
        GeneratorConfig("holme-kim", n=10, m=2, triad_p=1.2)


def test_check_seeds():
    g = from_edges(3, [(0, 1)])
    assert list(check_seeds(g, [2, 0])) == [2, 0]
    with pytest.raises(ValidationError):
        check_seeds(g, [0, 0])
    with pytest.raises(ValidationError):
        check_seeds(g, [3])


def test_graph_immutable():
    g = from_edges(2, [(0, 1, 0.5)])
    with pytest.raises(ValueError):
        g.p[0] = 0.1


def test_subgraph_maps_back():
    g = from_edges(4, [(0, 1, 0.5), (1, 2, 0.4), (2, 3, 0.3), (3, 0, 0.2)])
    sub, nodes = g.subgraph(np.array([False, True, True, True]))
    assert list(nodes) == [1, 2, 3]
    assert [(int(nodes[s]), int(nodes[d]), p) for s, d, p in sub.edges] == [(1, 2, 0.4), (2, 3, 0.3)]


def test_save_load_roundtrip(tmp_path):
    g = generate(GeneratorConfig("holme-kim", n=40, m=2, rng_seed=5))
    path = tmp_path / "g.edges"
    save_graph(g, path)
    h = load_graph(path)
    assert h.canonical_bytes() == g.canonical_bytes()
    assert h.weighting == "wc"
    meta = json.loads((tmp_path / "g.edges.json").read_text())
    assert meta["directed"] is True and meta["n"] == 40


def test_load_without_sidecar_assigns_weighted_cascade(tmp_path):
    path = tmp_path / "plain.txt"
    path.write_text("# comment\na b\nc b\n")
    g = load_graph(path)
    assert g.labels == ("a", "b", "c")
    assert np.allclose(g.p, 0.5)


def test_graph_from_spec():
    g = graph_from_spec({"model": "hk", "n": 30, "m": 2, "seed": 4})
    assert g.n == 30 and g.weighting == "wc"


@st.composite
def edge_sets(draw):
    n = draw(st.integers(2, 12))
    pairs = draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
                         .filter(lambda e: e[0] != e[1]), max_size=30))
    return n, sorted(pairs)


@settings(max_examples=60, deadline=None)
@given(edge_sets())
def test_weighted_cascade_sums_to_one(data):
    n, pairs = data
    g = assign_weighted_cascade(from_edges(n, pairs)) if pairs else DirectedGraph(n, [], [], [])
    sums = np.bincount(g.dst, weights=g.p, minlength=n)
    indeg = np.bincount(g.dst, minlength=n)
    assert np.allclose(sums[indeg > 0], 1.0, atol=1e-9)
    assert np.all(sums[indeg == 0] == 0)


@settings(max_examples=40, deadline=None)
@given(edge_sets(), st.floats(0, 1))
def test_edge_list_roundtrip_is_identity(data, p):
    n, pairs = data
    if not pairs:
        return
    g = uniform_ic(from_edges(n, pairs), round(p, 6))
    buf = io.StringIO()
    write_edge_list(g, buf)
    h = load_edge_list(buf.getvalue(), weighted=True)
    buf2 = io.StringIO()
    write_edge_list(h, buf2)
    assert buf2.getvalue() == buf.getvalue()
