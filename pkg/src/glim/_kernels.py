"""Hot loops for cascade simulation and live-edge enumeration.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy
version.  The numba path is used when numba imports and the environment
variable ``GLIM_NO_NUMBA`` is unset (or ``0``).  Both paths consume the same
random coins, so they return identical results.

Edge coins come from a counter-based SplitMix64 stream: the coin of edge
``e`` in simulation ``i`` is ``mix(key + (i*|E| + e + 1) * golden)``.  Coins
are therefore a pure function of ``(seed, i, e)``; chunking, thread count and
the order in which a cascade visits edges cannot change them.
"""
import os

import numpy as np
import scipy.sparse as sp

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_DISABLED = os.environ.get("GLIM_NO_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")
HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED

_MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
S30, S27, S31, S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
ONE = np.uint64(1)
INV53 = 1.0 / 9007199254740992.0  # 2**-53


def stream_key(seed: int) -> np.uint64:
    """Derive the 64-bit stream key of a seed (SplitMix64 finaliser on Python ints)."""
    z = (int(seed) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return np.uint64(z ^ (z >> 31))


def _mix(z):
    z = (z ^ (z >> S30)) * MIX1
    z = (z ^ (z >> S27)) * MIX2
    return z ^ (z >> S31)


def _uniform(key, ctr):
    return (_mix(key + (ctr + ONE) * GOLDEN) >> S11) * INV53


# ------------------------------------------------------------------ numpy path

def ic_counts_numpy(out_ptr, out_dst, out_p, seeds, key, sim0, n_sims):
    """Activated-node count of simulations ``sim0 .. sim0+n_sims-1``."""
    n = out_ptr.size - 1
    E = out_dst.size
    counts = np.empty(n_sims, dtype=np.int64)
    if E == 0 or seeds.size == 0:
        counts[:] = np.unique(seeds).size
        return counts
    src = np.repeat(np.arange(n), np.diff(out_ptr))
    # edge -> destination incidence, transposed so that reach = inc @ fire
    inc = sp.csr_matrix((np.ones(E), (out_dst, np.arange(E))), shape=(n, E))
    edge_ids = np.arange(E, dtype=np.uint64)
    batch = max(1, min(n_sims, 4_000_000 // E))
    with np.errstate(over="ignore"):
        for b0 in range(0, n_sims, batch):
            B = min(batch, n_sims - b0)
            sims = np.arange(sim0 + b0, sim0 + b0 + B, dtype=np.uint64)
            ctr = sims[:, None] * np.uint64(E) + edge_ids[None, :]
            live = _uniform(key, ctr) < out_p[None, :]
            active = np.zeros((B, n), dtype=bool)
            active[:, seeds] = True
            frontier = active.copy()
            while frontier.any():
                fire = (frontier[:, src] & live).astype(np.float64)
                new = (inc @ fire.T).T > 0
                new &= ~active
                active |= new
                frontier = new
            counts[b0:b0 + B] = active.sum(axis=1)
    return counts


def exact_numpy(n, src, dst, p, seeds):
    """Expected reachable-set size by enumerating every live-edge subset."""
    unc = np.flatnonzero((p > 0.0) & (p < 1.0))
    always = p >= 1.0
    K = unc.size
    total = 0.0
    chunk = 1 << min(K, 16)
    for m0 in range(0, 1 << K, chunk):
        masks = np.arange(m0, min(m0 + chunk, 1 << K), dtype=np.int64)
        bits = ((masks[:, None] >> np.arange(K)) & 1).astype(bool)
        w = np.prod(np.where(bits, p[unc][None, :], 1.0 - p[unc][None, :]), axis=1)
        live = np.repeat(always[None, :], masks.size, axis=0)
        live[:, unc] = bits
        active = np.zeros((masks.size, n), dtype=bool)
        active[:, seeds] = True
        changed = True
        while changed:
            changed = False
            for e in range(src.size):
                hit = live[:, e] & active[:, src[e]] & ~active[:, dst[e]]
                if hit.any():
                    active[hit, dst[e]] = True
                    changed = True
        total += float(np.dot(w, active.sum(axis=1)))
    return total


# ------------------------------------------------------------------ numba path

def _ic_counts_loop(out_ptr, out_dst, out_p, seeds, key, sim0, n_sims):
    n = out_ptr.size - 1
    E = np.uint64(out_dst.size)
    counts = np.empty(n_sims, dtype=np.int64)
    stamp = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for j in range(n_sims):
        sim = sim0 + j
        base = np.uint64(sim) * E
        tail = 0
        for s in seeds:
            if stamp[s] != sim:
                stamp[s] = sim
                queue[tail] = s
                tail += 1
        head = 0
        while head < tail:
            u = queue[head]
            head += 1
            for e in range(out_ptr[u], out_ptr[u + 1]):
                v = out_dst[e]
                if stamp[v] == sim:
                    continue
                if _uniform_scalar(key, base + np.uint64(e)) < out_p[e]:
                    stamp[v] = sim
                    queue[tail] = v
                    tail += 1
        counts[j] = tail
    return counts


def _exact_loop(n, src, dst, p, seeds):
    E = src.size
    pos = np.full(E, -1, dtype=np.int64)
    K = 0
    for e in range(E):
        if 0.0 < p[e] < 1.0:
            pos[e] = K
            K += 1
    unc_p = np.empty(K)
    for e in range(E):
        if pos[e] >= 0:
            unc_p[pos[e]] = p[e]
    active = np.zeros(n, dtype=np.bool_)
    total = 0.0
    for mask in range(1 << K):
        w = 1.0
        for i in range(K):
            if (mask >> i) & 1:
                w *= unc_p[i]
            else:
                w *= 1.0 - unc_p[i]
        if w == 0.0:
            continue
        active[:] = False
        for s in seeds:
            active[s] = True
        changed = True
        while changed:
            changed = False
            for e in range(E):
                if pos[e] >= 0:
                    live = ((mask >> pos[e]) & 1) == 1
                else:
                    live = p[e] >= 1.0
                if live and active[src[e]] and not active[dst[e]]:
                    active[dst[e]] = True
                    changed = True
        total += w * active.sum()
    return total


if HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)

    @_jit
    def _mix_scalar(z):
        z = (z ^ (z >> S30)) * MIX1
        z = (z ^ (z >> S27)) * MIX2
        return z ^ (z >> S31)

    @_jit
    def _uniform_scalar(key, ctr):
        return (_mix_scalar(key + (ctr + ONE) * GOLDEN) >> S11) * INV53

    ic_counts_numba = _jit(_ic_counts_loop)
    exact_numba = _jit(_exact_loop)
else:  # pragma: no cover
    ic_counts_numba = None
    exact_numba = None


def ic_counts(out_ptr, out_dst, out_p, seeds, key, sim0, n_sims):
    if USE_NUMBA:
        return ic_counts_numba(out_ptr, out_dst, out_p, seeds, key, sim0, n_sims)
    return ic_counts_numpy(out_ptr, out_dst, out_p, seeds, key, sim0, n_sims)


def exact_reach(n, src, dst, p, seeds):
    if USE_NUMBA:
        return exact_numba(n, src, dst, p, seeds)
    return exact_numpy(n, src, dst, p, seeds)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
