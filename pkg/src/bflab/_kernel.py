"""Jit-compiled core of the graph-process simulator.

Array layout shared with :mod:`bflab.process`:

  parent   int64[n]   union-find forest, parent[v] == v at roots
  csize    int64[n]   component vertex count, valid at roots
  cedges   int64[n]   component internal edge count, valid at roots
  hist     int64[I+1] hist[s] = number of components of size s, s <= I
  table    int64[cap] open-addressing set of present edges, key u*n+v, -1 empty,
                      cap a power of two; the wrapper sizes it so the load
                      factor stays below ~0.7 inside a kernel call
  rng      uint64[1]  splitmix64 state (see bflab.rng)
  counters int64[2]   [0] accepted edges m, [1] live component count

Union by size with path compression; ties go to the lower root index so
trajectories are reproducible.  All uint64 arithmetic wraps mod 2**64.
"""

import numpy as np
from numba import njit, int64, uint64

EMPTY = -1

_GOLDEN = uint64(0x9E3779B97F4A7C15)
_MIX1 = uint64(0xBF58476D1CE4E5B9)
_MIX2 = uint64(0x94D049BB133111EB)

RULE_ER = 0
RULE_BF = 1
RULE_BOUNDED = 2


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> uint64(30))) * _MIX1
    z = (z ^ (z >> uint64(27))) * _MIX2
    return z ^ (z >> uint64(31))


@njit(cache=True, inline="always")
def _next_u64(rng):
    rng[0] = rng[0] + _GOLDEN
    return _mix64(rng[0])


@njit(cache=True, inline="always")
def _rand_below(rng, n):
    # unbiased bounded draw: reject outputs below 2**64 mod n
    nn = uint64(n)
    threshold = (uint64(0) - nn) % nn
    while True:
        r = _next_u64(rng)
        if r >= threshold:
            return int64(r % nn)


@njit(cache=True, inline="always")
def _probe(table, key):
    # slot holding `key`, or the empty slot where it would go
    mask = uint64(table.shape[0] - 1)
    h = _mix64(uint64(key)) & mask
    while True:
        k = table[int64(h)]
        if k == key or k == EMPTY:
            return int64(h)
        h = (h + uint64(1)) & mask


@njit(cache=True, inline="always")
def _find(parent, v):
    r = v
    while parent[r] != r:
        r = parent[r]
    while parent[v] != r:
        nxt = parent[v]
        parent[v] = r
        v = nxt
    return r


@njit(cache=True, inline="always")
def _sample_absent(table, rng, n):
    # uniform over unordered absent pairs: draw, reject loops and present edges
    while True:
        a = _rand_below(rng, n)
        b = _rand_below(rng, n)
        if a == b:
            continue
        if a > b:
            a, b = b, a
        key = a * n + b
        slot = _probe(table, key)
        if table[slot] != key:
            return a, b, key, slot


@njit(cache=True, inline="always")
def _capped(csize, parent, v, kcap):
    s = csize[_find(parent, v)]
    return s if s < kcap else kcap


@njit(cache=True, inline="always")
def _choose_first(parent, csize, rule_code, kcap, dtable, a, b, c, d):
    if rule_code == RULE_ER:
        return True
    if rule_code == RULE_BF:
        return csize[_find(parent, a)] == 1 and csize[_find(parent, b)] == 1
    sa = _capped(csize, parent, a, kcap)
    sb = _capped(csize, parent, b, kcap)
    sc = _capped(csize, parent, c, kcap)
    sd = _capped(csize, parent, d, kcap)
    idx = (((sa - 1) * kcap + (sb - 1)) * kcap + (sc - 1)) * kcap + (sd - 1)
    return dtable[idx] == 0


@njit(cache=True, inline="always")
def _add_edge(parent, csize, cedges, hist, counters, u, v):
    # returns (merged, root_after); histogram tracked up to its own length
    i_track = hist.shape[0] - 1
    ru = _find(parent, u)
    rv = _find(parent, v)
    counters[0] += 1
    if ru == rv:
        cedges[ru] += 1
        return False, ru
    su = csize[ru]
    sv = csize[rv]
    if su < sv or (su == sv and rv < ru):
        ru, rv = rv, ru
        su, sv = sv, su
    parent[rv] = ru
    csize[ru] = su + sv
    cedges[ru] += cedges[rv] + 1
    if su <= i_track:
        hist[su] -= 1
    if sv <= i_track:
        hist[sv] -= 1
    if su + sv <= i_track:
        hist[su + sv] += 1
    counters[1] -= 1
    return True, ru


@njit(cache=True, nogil=True)
def run_steps(parent, csize, cedges, hist, table, rng, counters,
              rule_code, kcap, dtable, n_steps, out_rec):
    """Execute ``n_steps`` process steps; record the last step in out_rec.

    out_rec int64[6]: [chose_first, merged, u, v, root_after, size_after].
    """
    n = parent.shape[0]
    chose_first = int64(1)
    merged = False
    u = int64(-1)
    v = int64(-1)
    root = int64(-1)
    for _ in range(n_steps):
        a, b, key1, slot1 = _sample_absent(table, rng, n)
        c, d, key2, slot2 = _sample_absent(table, rng, n)
        first = _choose_first(parent, csize, rule_code, kcap, dtable, a, b, c, d)
        if first:
            u, v, key, slot = a, b, key1, slot1
        else:
            u, v, key, slot = c, d, key2, slot2
        table[slot] = key
        merged, root = _add_edge(parent, csize, cedges, hist, counters, u, v)
        chose_first = int64(1) if first else int64(0)
    out_rec[0] = chose_first
    out_rec[1] = int64(1) if merged else int64(0)
    out_rec[2] = u
    out_rec[3] = v
    out_rec[4] = root
    out_rec[5] = csize[root] if root >= 0 else int64(-1)


@njit(cache=True, nogil=True)
def apply_pair(parent, csize, cedges, hist, table, counters,
               rule_code, kcap, dtable, a, b, c, d, out_rec):
    """Apply one step with externally supplied candidate pairs (both absent)."""
    n = parent.shape[0]
    first = _choose_first(parent, csize, rule_code, kcap, dtable, a, b, c, d)
    if first:
        u, v = a, b
    else:
        u, v = c, d
    key = u * n + v
    table[_probe(table, key)] = key
    merged, root = _add_edge(parent, csize, cedges, hist, counters, u, v)
    out_rec[0] = int64(1) if first else int64(0)
    out_rec[1] = int64(1) if merged else int64(0)
    out_rec[2] = u
    out_rec[3] = v
    out_rec[4] = root
    out_rec[5] = csize[root]


@njit(cache=True, nogil=True)
def sample_edges(table, rng, n, out_uv):
    """Fill out_uv[k] = (u, v) with independent uniform absent edges."""
    for k in range(out_uv.shape[0]):
        a, b, _key, _slot = _sample_absent(table, rng, n)
        out_uv[k, 0] = a
        out_uv[k, 1] = b


@njit(cache=True, nogil=True)
def edge_present(table, n, u, v):
    key = u * n + v
    return table[_probe(table, key)] == key


@njit(cache=True, nogil=True)
def rehash(old_table, new_table):
    for i in range(old_table.shape[0]):
        k = old_table[i]
        if k != EMPTY:
            new_table[_probe(new_table, k)] = k


@njit(cache=True, nogil=True)
def find_root(parent, v):
    return _find(parent, v)


def mix64_py(z):
    """Python-visible copy of the kernel mixer (for lockstep tests)."""
    out = np.empty(1, dtype=np.uint64)
    _fill_mix(np.uint64(z), out)
    return int(out[0])


@njit(cache=True)
def _fill_mix(z, out):
    out[0] = _mix64(z)
