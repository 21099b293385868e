import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glim import _kernels
from glim.errors import DomainError, SizeError
from glim.graph import GeneratorConfig, from_edges, generate, make_rng
from glim.simulate import exact_spread, simulate_ic, upper_bound_spread

from conftest import brute_force_spread, random_small_graph


def test_chain_deterministic(chain):
    est = simulate_ic(chain, [0], n_sims=500)
    assert est.mean == 3 and est.std_err == 0


def test_all_seeded_gives_n():
    g = generate(GeneratorConfig(n=30, m=2, rng_seed=1))
    assert simulate_ic(g, range(30), n_sims=50).mean == 30


def test_triangle_mc_matches_exact(triangle):
    est = simulate_ic(triangle, [0], n_sims=20_000, rng_seed=5)
    assert abs(est.mean - 2.125) <= 3 * est.std_err


def test_exact_examples(chain, triangle):
    assert exact_spread(chain, [0]).mean == 3.0
    assert exact_spread(from_edges(2, [(0, 1, 0.3)]), [0]).mean == pytest.approx(1.3)
    e = exact_spread(triangle, [0])
    assert e.mean == pytest.approx(2.125) and e.n_sims == 0 and e.std_err == 0


def test_exact_refuses_large_graphs():
    g = generate(GeneratorConfig(n=30, m=2, rng_seed=1))
    with pytest.raises(SizeError):
        exact_spread(g, [0])


def test_errors(chain):
    with pytest.raises(DomainError):
        simulate_ic(chain, [])
    with pytest.raises(DomainError):
        simulate_ic(chain, [0], n_sims=0)
    with pytest.raises(DomainError):
        upper_bound_spread(chain, [0], hops=5)


def test_upper_bound_examples():
    star = from_edges(4, [(1, 0, 1 / 3), (2, 0, 1 / 3), (3, 0, 1 / 3)])
    assert upper_bound_spread(star, [1, 2, 3], hops=1) == pytest.approx(4.0)
    two = from_edges(3, [(1, 0, 0.5), (2, 0, 0.5)])
    assert upper_bound_spread(two, [1, 2], hops=1) == pytest.approx(3.0)
    assert exact_spread(two, [1, 2]).mean == pytest.approx(2.75)
    g = generate(GeneratorConfig(n=25, m=2, rng_seed=2))
    assert upper_bound_spread(g, range(25)) == 25


def test_deterministic_and_thread_independent():
    g = generate(GeneratorConfig("holme-kim", n=200, m=3, rng_seed=4))
    a = simulate_ic(g, [0, 5], n_sims=5000, rng_seed=9, threads=1)
    b = simulate_ic(g, [5, 0], n_sims=5000, rng_seed=9, threads=4)
    assert a == b
    c = simulate_ic(g, [0, 5], n_sims=5000, rng_seed=10)
    assert c.mean != a.mean


def test_common_random_numbers_make_mc_monotone():
    g = generate(GeneratorConfig(n=120, m=2, rng_seed=6))
    rng = make_rng(0)
    for _ in range(20):
        s = list(rng.choice(g.n, 4, replace=False))
        small = simulate_ic(g, s[:2], 300, rng_seed=1).mean
        big = simulate_ic(g, s, 300, rng_seed=1).mean
        assert big >= small


def test_kernels_agree_between_backends():
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba unavailable")
    g = generate(GeneratorConfig("holme-kim", n=150, m=3, rng_seed=8))
    seeds = np.array([0, 7, 33])
    key = _kernels.stream_key(123)
    a = _kernels.ic_counts_numba(g.out_ptr, g.dst, g.p, seeds, key, 17, 700)
    b = _kernels.ic_counts_numpy(g.out_ptr, g.dst, g.p, seeds, key, 17, 700)
    assert np.array_equal(a, b)
    t = from_edges(4, [(0, 1, 0.5), (1, 2, 0.3), (0, 2, 0.5), (2, 3, 1.0), (3, 0, 0.2)])
    x = _kernels.exact_numba(t.n, t.src, t.dst, t.p, np.array([0]))
    y = _kernels.exact_numpy(t.n, t.src, t.dst, t.p, np.array([0]))
    assert x == pytest.approx(y, abs=1e-12)


def test_numpy_fallback_selected_by_env_flag():
    code = "from glim import _kernels; print(_kernels.backend())"
    env = dict(os.environ, GLIM_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_exact_matches_brute_force(seed):
    rng = make_rng(seed)
    g = random_small_graph(rng)
    s = list(rng.choice(g.n, int(rng.integers(1, g.n + 1)), replace=False))
    assert exact_spread(g, s).mean == pytest.approx(brute_force_spread(g, s), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_exact_is_monotone(seed):
    rng = make_rng(seed)
    g = random_small_graph(rng)
    order = list(rng.permutation(g.n))
    vals = [exact_spread(g, order[:i]).mean for i in range(1, g.n + 1)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(g.n)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_mc_mean_within_bounds(seed):
    rng = make_rng(seed)
    g = random_small_graph(rng)
    s = list(rng.choice(g.n, int(rng.integers(1, g.n + 1)), replace=False))
    est = simulate_ic(g, s, 200, rng_seed=seed)
    assert len(s) <= est.mean <= g.n and est.std_err >= 0
