"""Numba kernels against the pure-numpy fallback.

Both paths draw the same counter-based coins, so each pair of runs must
return identical counts; the script checks that before printing timings.

    python3 benchmarks/bench_kernels.py [--sims 1000] [--repeats 2]
"""
import argparse
import time

import numpy as np

from glim import _kernels
from glim.graph import GeneratorConfig, from_edges, generate


def best_of(fn, repeats):
    out, best = None, np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def bench_cascades(sims, repeats):
    print(f"{'graph':>22} {'edges':>7} {'numba s':>9} {'numpy s':>9} {'speedup':>8}")
    key = _kernels.stream_key(42)
    for n, m in [(1000, 2), (5000, 3), (20000, 5)]:
        g = generate(GeneratorConfig("barabasi-albert", n, m, 0.5, 1))
        seeds = np.argsort(-g.out_degree, kind="stable")[:20].astype(np.int64)
        args = (g.out_ptr, g.dst, g.p, seeds, key, 0, sims)
        _kernels.ic_counts_numba(g.out_ptr, g.dst, g.p, seeds, key, 0, 10)    # compile
        a, t_jit = best_of(lambda: _kernels.ic_counts_numba(*args), repeats)
        b, t_np = best_of(lambda: _kernels.ic_counts_numpy(*args), repeats)
        assert np.array_equal(a, b), "backends disagree"
        print(f"{f'BA n={n} m={m}':>22} {g.n_edges:>7} {t_jit:>9.3f} {t_np:>9.3f} {t_np / t_jit:>8.1f}x")


def bench_exact(repeats):
    rng = np.random.default_rng(0)
    print(f"\n{'exact enumeration':>22} {'edges':>7} {'numba s':>9} {'numpy s':>9} {'speedup':>8}")
    for n_edges in (10, 14, 18):
        pairs = [(a, b) for a in range(10) for b in range(10) if a != b]
        pick = rng.choice(len(pairs), n_edges, replace=False)
        g = from_edges(10, [(*pairs[i], float(rng.uniform(0.1, 0.9))) for i in pick])
        seeds = np.array([0, 1])
        args = (g.n, g.src, g.dst, g.p, seeds)
        _kernels.exact_numba(*args)
        a, t_jit = best_of(lambda: _kernels.exact_numba(*args), repeats)
        b, t_np = best_of(lambda: _kernels.exact_numpy(*args), repeats)
        assert abs(a - b) < 1e-9, "backends disagree"
        print(f"{'10 nodes':>22} {n_edges:>7} {t_jit:>9.4f} {t_np:>9.4f} {t_np / t_jit:>8.1f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sims", type=int, default=1000)
    ap.add_argument("--repeats", type=int, default=2)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"active backend: {_kernels.backend()}  (GLIM_NO_NUMBA=1 selects numpy)\n")
    bench_cascades(args.sims, args.repeats)
    bench_exact(args.repeats)


if __name__ == "__main__":
    main()
