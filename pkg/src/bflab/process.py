"""Exact simulation of two-choice random graph processes.

At each step two candidate edges are drawn uniformly (with replacement) from
the absent edges; a rule picks one and it is added.  Supported rules:

* Erdos-Renyi: always add the first edge.
* Bohman-Frieze: add the first edge iff it would join two isolated vertices,
  otherwise add the second.
* bounded-size(K): the choice is a table lookup on the 4-tuple of capped
  component sizes of the candidate endpoints, cap(s) = min(s, K+1) with K+1
  meaning "larger than K".

Component structure lives in a union-find forest with per-component vertex
and internal-edge counts, so trees / unicyclic / complex components are
classified exactly at any time.  Cost per step is O(alpha(n)) plus the
rejection cost of absent-edge sampling, which is negligible for t = O(1).

A ProcessState is confined to one thread at a time (transferable, never
shared mutably); ensembles parallelize over independent states and seeds.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .errors import InvalidArgumentError, ProcessExhaustedError

DEFAULT_I_TRACK = 2048

_DUMMY_TABLE = np.zeros(1, dtype=np.uint8)


def bf_decision_table():
    """K=1 bounded-size table reproducing the Bohman-Frieze choice.

    Entry 0 ("first") iff both endpoints of the first candidate are isolated;
    the second candidate's sizes are ignored, as the rule never looks at them.
    """
    table = []
    for sa in (1, 2):
        for sb in (1, 2):
            for _sc in (1, 2):
                for _sd in (1, 2):
                    table.append(0 if (sa == 1 and sb == 1) else 1)
    return tuple(table)


@dataclass(frozen=True)
class ProcessRule:
    """Tagged edge-selection rule; construct via the classmethods."""

    kind: str                      # "er" | "bf" | "bounded"
    k: int = 0                     # size cutoff for bounded rules
    table: tuple = ()              # row-major over (cap(e1.u),cap(e1.v),cap(e2.u),cap(e2.v))

    def __post_init__(self):
        if self.kind not in ("er", "bf", "bounded"):
            raise InvalidArgumentError(f"unknown rule kind {self.kind!r}")
        if self.kind == "bounded":
            if self.k < 1:
                raise InvalidArgumentError("bounded rule needs cutoff K >= 1")
            want = (self.k + 1) ** 4
            if len(self.table) != want:
                raise InvalidArgumentError(
                    f"decision table must be total: need {want} entries, "
                    f"got {len(self.table)}")
            if any(x not in (0, 1) for x in self.table):
                raise InvalidArgumentError("decision table entries must be 0 or 1")

    @classmethod
    def erdos_renyi(cls):
        return cls("er")

    @classmethod
    def bohman_frieze(cls):
        return cls("bf")

    @classmethod
    def bounded(cls, k, table):
        return cls("bounded", k, tuple(table))

    @classmethod
    def bounded_from_fn(cls, k, choose_first):
        """Build a bounded-size rule from a predicate on the capped 4-tuple."""
        kcap = k + 1
        table = []
        for sa in range(1, kcap + 1):
            for sb in range(1, kcap + 1):
                for sc in range(1, kcap + 1):
                    for sd in range(1, kcap + 1):
                        table.append(0 if choose_first(sa, sb, sc, sd) else 1)
        return cls("bounded", k, tuple(table))

    @property
    def code(self):
        return {"er": _kernel.RULE_ER, "bf": _kernel.RULE_BF,
                "bounded": _kernel.RULE_BOUNDED}[self.kind]

    @property
    def kcap(self):
        return self.k + 1 if self.kind == "bounded" else 0

    def table_array(self):
        if self.kind != "bounded":
            return _DUMMY_TABLE
        return np.asarray(self.table, dtype=np.uint8)

    def label(self):
        return self.kind if self.kind != "bounded" else f"bounded:{self.k}"


def parse_rule(text, table=None):
    """Parse ``er``, ``bf`` or ``bounded:K`` (optionally with an explicit table).

    A bounded rule without an explicit table defaults to "first iff both
    endpoints of the first candidate have capped size 1".
    """
    text = text.strip().lower()
    if text == "er":
        return ProcessRule.erdos_renyi()
    if text == "bf":
        return ProcessRule.bohman_frieze()
    if text.startswith("bounded:"):
        try:
            k = int(text.split(":", 1)[1])
        except ValueError:
            raise InvalidArgumentError(f"bad bounded rule string {text!r}") from None
        if table is not None:
            return ProcessRule.bounded(k, table)
        return ProcessRule.bounded_from_fn(
            k, lambda sa, sb, sc, sd: sa == 1 and sb == 1)
    raise InvalidArgumentError(f"unknown rule {text!r}")


@dataclass
class StepOutcome:
    chosen: str                    # "first" | "second"
    merged: bool
    cycle_created: bool
    edge: tuple
    resulting_class: str           # "tree" | "unicyclic" | "complex"


@dataclass
class CensusRecord:
    trees: int
    unicyclic: int
    complex: int
    c1: int
    c2: int
    unicyclic_sizes: np.ndarray

    @property
    def total(self):
        return self.trees + self.unicyclic + self.complex


@dataclass
class GraphStats:
    """Snapshot of one process state; serializes to a flat CSV row or JSON."""

    t: float
    n: int
    m: int
    x_fraction: np.ndarray         # x_fraction[i-1] = X_i / n for i <= i_track
    s_k: tuple                     # susceptibility moments k = 1..k_max
    s_L: float
    L: int
    c1: int
    c2: int
    census: CensusRecord

    def to_json_dict(self):
        return {
            "t": self.t, "n": self.n, "m": self.m,
            "c1": self.c1, "c2": self.c2,
            "s_k": list(self.s_k), "s_L": self.s_L, "L": self.L,
            "census": {"trees": self.census.trees,
                       "unicyclic": self.census.unicyclic,
                       "complex": self.census.complex},
            "unicyclic_sizes": [int(s) for s in self.census.unicyclic_sizes],
            "x_fraction": [float(x) for x in self.x_fraction],
        }

    def csv_header(self):
        cols = ["t", "n", "m", "c1", "c2"]
        cols += [f"s_{k}" for k in range(1, len(self.s_k) + 1)]
        cols += ["s_L", "L", "trees", "unicyclic", "complex"]
        cols += [f"x_{i}" for i in range(1, len(self.x_fraction) + 1)]
        return cols

    def csv_row(self):
        row = [self.t, self.n, self.m, self.c1, self.c2]
        row += list(self.s_k)
        row += [self.s_L, self.L, self.census.trees, self.census.unicyclic,
                self.census.complex]
        row += [float(x) for x in self.x_fraction]
        return row


class ProcessState:
    """Mutable simulation state; create with :func:`new_process`."""

    def __init__(self, n, rule, seed, i_track=DEFAULT_I_TRACK):
        if n < 2:
            raise InvalidArgumentError(f"need at least 2 vertices, got {n}")
        if i_track < 1:
            raise InvalidArgumentError("i_track must be >= 1")
        self.n = int(n)
        self.rule = rule
        self.seed = int(seed)
        self.i_track = int(i_track)
        self.parent = np.arange(n, dtype=np.int64)
        self.csize = np.ones(n, dtype=np.int64)
        self.cedges = np.zeros(n, dtype=np.int64)
        self.hist = np.zeros(min(i_track, n) + 1, dtype=np.int64)
        self.hist[1] = n
        self.counters = np.array([0, n], dtype=np.int64)
        self.rng = np.array([seed], dtype=np.uint64)
        self.table = np.full(1024, _kernel.EMPTY, dtype=np.int64)
        self._dtable = rule.table_array()
        self._out = np.zeros(6, dtype=np.int64)

    @property
    def m(self):
        return int(self.counters[0])

    @property
    def t(self):
        return 2.0 * self.m / self.n

    @property
    def component_count(self):
        return int(self.counters[1])

    @property
    def x1_count(self):
        return int(self.hist[1])

    @property
    def max_edges(self):
        return self.n * (self.n - 1) // 2

    def _ensure_capacity(self, m_target):
        need = int(m_target / 0.6) + 16
        cap = len(self.table)
        if cap >= need:
            return
        while cap < need:
            cap *= 2
        new = np.full(cap, _kernel.EMPTY, dtype=np.int64)
        _kernel.rehash(self.table, new)
        self.table = new

    def _root_view(self):
        roots = np.flatnonzero(self.parent == np.arange(self.n, dtype=np.int64))
        return self.csize[roots], self.cedges[roots]


def new_process(n, rule, seed, i_track=DEFAULT_I_TRACK):
    """Empty graph on ``n >= 2`` vertices; (n, rule, seed) fixes the trajectory."""
    return ProcessState(n, rule, seed, i_track=i_track)


def sample_candidate_pair(state):
    """Two independent uniform absent edges (consumes the state's RNG stream)."""
    if state.m >= state.max_edges:
        raise ProcessExhaustedError("graph is complete; no absent edges remain")
    out = np.empty((2, 2), dtype=np.int64)
    _kernel.sample_edges(state.table, state.rng, state.n, out)
    return (int(out[0, 0]), int(out[0, 1])), (int(out[1, 0]), int(out[1, 1]))


def _classify(size, edges):
    if edges == size - 1:
        return "tree"
    if edges == size:
        return "unicyclic"
    return "complex"


def _outcome_from_rec(state):
    rec = state._out
    root = int(rec[4])
    size = int(state.csize[root])
    edges = int(state.cedges[root])
    return StepOutcome(
        chosen="first" if rec[0] == 1 else "second",
        merged=bool(rec[1]),
        cycle_created=not bool(rec[1]),
        edge=(int(rec[2]), int(rec[3])),
        resulting_class=_classify(size, edges),
    )


def step(state):
    """Sample a candidate pair, apply the rule, add one edge."""
    if state.m >= state.max_edges:
        raise ProcessExhaustedError("graph is complete; no absent edges remain")
    state._ensure_capacity(state.m + 1)
    _kernel.run_steps(state.parent, state.csize, state.cedges, state.hist,
                      state.table, state.rng, state.counters,
                      state.rule.code, state.rule.kcap, state._dtable,
                      1, state._out)
    return _outcome_from_rec(state)


def apply_candidate_pair(state, e1, e2):
    """Apply one step with explicit candidate pairs (both must be absent edges)."""
    pairs = []
    for u, v in (e1, e2):
        u, v = int(u), int(v)
        if not (0 <= u < state.n and 0 <= v < state.n) or u == v:
            raise InvalidArgumentError(f"bad vertex pair ({u}, {v})")
        if u > v:
            u, v = v, u
        if _kernel.edge_present(state.table, state.n, u, v):
            raise InvalidArgumentError(f"edge ({u}, {v}) already present")
        pairs.append((u, v))
    state._ensure_capacity(state.m + 1)
    (a, b), (c, d) = pairs
    _kernel.apply_pair(state.parent, state.csize, state.cedges, state.hist,
                       state.table, state.counters,
                       state.rule.code, state.rule.kcap, state._dtable,
                       a, b, c, d, state._out)
    return _outcome_from_rec(state)


def run_until(state, t_target, k_max=2, L=None):
    """Advance to exactly floor(t_target * n / 2) total edges; return a snapshot."""
    if t_target < state.t - 1e-12:
        raise InvalidArgumentError(
            f"t_target {t_target} is below current t {state.t}")
    if t_target >= state.n - 1:
        raise InvalidArgumentError("t_target must be < n - 1")
    m_target = int(math.floor(t_target * state.n / 2.0 + 1e-9))
    steps = m_target - state.m
    if steps > 0:
        state._ensure_capacity(m_target)
        _kernel.run_steps(state.parent, state.csize, state.cedges, state.hist,
                          state.table, state.rng, state.counters,
                          state.rule.code, state.rule.kcap, state._dtable,
                          steps, state._out)
    return snapshot(state, k_max=k_max, L=L)


def susceptibility(state, k):
    """S_k = (1/n) * sum over components |C|^(k+1), one pass over the forest."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidArgumentError(f"moment order must be an integer >= 1, got {k}")
    sizes, _ = state._root_view()
    return float(np.sum(sizes.astype(np.float64) ** (k + 1)) / state.n)


def restricted_susceptibility(state, L):
    """Susceptibility restricted to components of size <= L (bounded by L)."""
    if L < 1:
        raise InvalidArgumentError(f"size cap must be >= 1, got {L}")
    sizes, _ = state._root_view()
    small = sizes[sizes <= L].astype(np.float64)
    return float(np.sum(small * small) / state.n)


def component_census(state):
    """Classify every component as tree / unicyclic / complex."""
    sizes, edges = state._root_view()
    trees = int(np.count_nonzero(edges == sizes - 1))
    unicyclic_mask = edges == sizes
    unicyclic = int(np.count_nonzero(unicyclic_mask))
    complex_ = sizes.size - trees - unicyclic
    c1, c2 = _two_largest(sizes)
    return CensusRecord(trees=trees, unicyclic=unicyclic, complex=complex_,
                        c1=c1, c2=c2,
                        unicyclic_sizes=np.sort(sizes[unicyclic_mask]))


def _two_largest(sizes):
    if sizes.size == 1:
        return int(sizes[0]), 0
    top = np.partition(sizes, sizes.size - 2)[-2:]
    return int(top.max()), int(top.min())


def snapshot(state, k_max=2, L=None):
    """GraphStats at the current time; L defaults to the tracking cutoff."""
    if L is None:
        L = state.i_track
    sizes, edges = state._root_view()
    n = state.n
    i_track = len(state.hist) - 1
    counts = np.bincount(sizes[sizes <= i_track], minlength=i_track + 1)
    x_fraction = counts[1:] * np.arange(1, i_track + 1) / n
    sizes_f = sizes.astype(np.float64)
    s_k = tuple(float(np.sum(sizes_f ** (k + 1)) / n) for k in range(1, k_max + 1))
    small = sizes_f[sizes <= L]
    s_L = float(np.sum(small * small) / n)
    census = component_census(state)
    return GraphStats(t=state.t, n=n, m=state.m, x_fraction=x_fraction,
                      s_k=s_k, s_L=s_L, L=int(L), c1=census.c1, c2=census.c2,
                      census=census)


def check_invariants(state):
    """Debug assertion of the forest's structural invariants."""
    sizes, edges = state._root_view()
    assert int(sizes.sum()) == state.n, "component sizes must sum to n"
    assert int(edges.sum()) == state.m, "internal edges must sum to m"
    assert np.all(edges >= sizes - 1), "every component must be connected"
    assert sizes.size == state.component_count
    i_track = len(state.hist) - 1
    counts = np.bincount(sizes[sizes <= i_track], minlength=i_track + 1)
    assert np.array_equal(counts, state.hist), "size histogram out of sync"
    assert state.x1_count == int(counts[1])
