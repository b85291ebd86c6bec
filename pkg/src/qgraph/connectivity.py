"""Spanning forests of a hidden multigraph from BIS and OR queries.

``det_graph_conn`` is the deterministic phase algorithm: parts of the
current partition repeatedly look for neighbouring parts with
:func:`det_find_many_proc`, merge along a spanning forest of what they
found, and finally every merge is resolved to a real edge with
:func:`det_find_edge`.  ``rand_graph_conn_or`` and ``rand_graph_conn_bis``
are the fixed-schedule randomized algorithms built on edge sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._hashing import derive_key, hash_array, leading_zeros
from ._intmath import ceil_log2
from .oracle import (
    BisView,
    Kind,
    Oracle,
    PairView,
    Query,
    QueryFamily,
    ask,
    bis_query,
    idle_rounds,
    mask_members,
    parallel,
    to_mask,
)
from .recovery import (
    SampledBitTests,
    binary_search_proc,
    det_find_many_proc,
    find_many_target,
    majority_scale,
    n_scales,
    rand_supp_rec_proc,
    reps_for,
)


class NoEdge(Exception):
    pass


class EmptyBoundary(Exception):
    pass


class DisjointSetPartition:
    """Union-find over ``0..n-1`` with union by rank and path halving."""

    def __init__(self, n: int):
        self.n = n
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, v: int) -> int:
        parent = self.parent
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    def union(self, u: int, v: int) -> bool:
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return False
        if self.rank[ru] < self.rank[rv]:
            ru, rv = rv, ru
        self.parent[rv] = ru
        if self.rank[ru] == self.rank[rv]:
            self.rank[ru] += 1
        return True

    def same(self, u: int, v: int) -> bool:
        return self.find(u) == self.find(v)

    def parts(self) -> list[list[int]]:
        """Parts as sorted vertex lists, ordered by smallest vertex."""
        groups: dict[int, list[int]] = {}
        for v in range(self.n):
            groups.setdefault(self.find(v), []).append(v)
        return sorted(groups.values(), key=lambda p: p[0])

    def labels(self) -> list[int]:
        """Label per vertex: the smallest vertex of its part."""
        out = [0] * self.n
        for part in self.parts():
            for v in part:
                out[v] = part[0]
        return out

    def n_parts(self) -> int:
        return sum(1 for v in range(self.n) if self.find(v) == v)

    @classmethod
    def from_labels(cls, labels):
        dsu = cls(len(labels))
        first: dict[int, int] = {}
        for v, lab in enumerate(labels):
            if lab in first:
                dsu.union(first[lab], v)
            else:
                first[lab] = v
        return dsu


@dataclass
class SpanningForest:
    n: int
    edges: list = field(default_factory=list)

    @classmethod
    def from_edges(cls, n: int, edges) -> "SpanningForest":
        """Reduce an edge collection to a forest, scanning edges in sorted order."""
        dsu = DisjointSetPartition(n)
        kept = []
        for u, v in sorted({(min(a, b), max(a, b)) for a, b in edges}):
            if dsu.union(u, v):
                kept.append((u, v))
        return cls(n, kept)

    def components(self) -> list[int]:
        dsu = DisjointSetPartition(self.n)
        for u, v in self.edges:
            dsu.union(u, v)
        return dsu.labels()

    def n_components(self) -> int:
        return len(set(self.components()))


@dataclass
class Failure:
    reason: str
    forest: SpanningForest | None = None


def spanning_pairs(n_items: int, pairs) -> list[tuple[int, int]]:
    """A spanning forest of a graph on item ids, lexicographic tie-breaking."""
    dsu = DisjointSetPartition(n_items)
    return [(a, b) for a, b in sorted(pairs) if dsu.union(a, b)]


# --------------------------------------------------------------------------
# deterministic


class PartsView:
    """Positions are parts; OR over positions is BIS(S, union of those parts)."""

    kind = Kind.BIS

    def __init__(self, s_mask: int, part_masks):
        self.s_mask = s_mask
        self.part_masks = list(part_masks)
        self.n_dims = len(self.part_masks)

    def __len__(self):
        return self.n_dims

    def query(self, positions, linear=False):
        b = 0
        for p in positions:
            b |= self.part_masks[p]
        return Query(Kind.BIS, (self.s_mask, b)) if b else None

    def true_support(self, instance):
        adj = instance.adj
        touch = 0
        for u in mask_members(self.s_mask):
            touch |= adj[u]
        return np.array([p for p, m in enumerate(self.part_masks) if m & touch], dtype=np.int64)


def det_find_edge_proc(A, B, r: int, check: bool = True):
    """Binary search b in B with an edge into A, then a in A adjacent to b.

    With ``check`` the existence test rides along with the first search
    round, so the procedure still takes at most 2r rounds.  Returns None
    when there is no edge.
    """
    A, B = sorted(A), sorted(B)
    pb = yield from binary_search_proc(BisView(to_mask(A), B), r, validate_nonzero=check)
    if pb is None:
        return None
    b = B[pb]
    pa = yield from binary_search_proc(BisView(1 << b, A), r)
    return (A[pa], b)


def det_find_edge(oracle: Oracle, A, B, r: int) -> tuple[int, int]:
    """An edge (a, b) with a in A and b in B, or NoEdge."""
    edge = oracle.run(det_find_edge_proc(A, B, r))
    if edge is None:
        raise NoEdge()
    return edge


@dataclass
class DetConnReport:
    """Per-run bookkeeping of the deterministic algorithm."""

    subphases: list = field(default_factory=list)  # (phase, live_before, live_after, target, c)
    retired: int = 0
    cleanup_parts: int = 0
    cap_hit: bool = False


def det_graph_conn(oracle: Oracle, r: int, *, sub_phases: int = 12, small: int = 16,
                   round_cap: int | None = None, report: DetConnReport | None = None) -> SpanningForest:
    n = oracle.n_vertices
    return oracle.run(det_graph_conn_proc(n, r, sub_phases=sub_phases, small=small,
                                          round_cap=round_cap, report=report))


def det_graph_conn_proc(n: int, r: int, *, sub_phases: int = 12, small: int = 16,
                        round_cap: int | None = None, report: DetConnReport | None = None):
    report = report if report is not None else DetConnReport()
    cap = round_cap if round_cap is not None else 35 * r
    reserve = 1 + 2 * r  # clean-up plus tree building
    threshold = max(small, math.isqrt(n - 1) + 1 if n > 1 else 1)
    live = [1 << v for v in range(n)]
    pseudo: list[tuple[int, int]] = []
    rounds = 0
    phase = 0

    def counted(proc):
        nonlocal rounds
        try:
            batch = next(proc)
            while True:
                rounds += 1
                batch = proc.send((yield batch))
        except StopIteration as stop:
            return stop.value

    while r >= 2 and len(live) > threshold and not report.cap_hit:
        for _ in range(sub_phases):
            if len(live) <= threshold:
                break
            N = len(live) - 1
            theta = math.log(n) / math.log(N) if N > 1 else float(r)
            c = int(min(r - 1, max(1, math.floor(theta * 4 ** phase))))
            # c is an integer, so the target is the one det_find_many derives from it
            target = min(N, find_many_target(N, r, c))
            need = -(-2 * r // c)
            if rounds + need + reserve > cap:
                report.cap_hit = True
                break
            procs = [
                det_find_many_proc(PartsView(s, live[:i] + live[i + 1:]), r, c, target)
                for i, s in enumerate(live)
            ]
            results = yield from counted(parallel(procs))
            found = []
            keep = []
            for i, got in enumerate(results):
                if not got:
                    report.retired += 1
                    continue
                keep.append(i)
                for p in got:
                    j = p if p < i else p + 1
                    found.append((min(i, j), max(i, j)))
            forest = spanning_pairs(len(live), found)
            dsu = DisjointSetPartition(len(live))
            for i, j in forest:
                pseudo.append((live[i], live[j]))
                dsu.union(i, j)
            merged: dict[int, int] = {}
            for i in keep:
                root = dsu.find(i)
                merged[root] = merged.get(root, 0) | live[i]
            before = len(live)
            live = sorted(merged.values(), key=lambda m: m & -m)
            report.subphases.append((phase, before, len(live), target, c))
        phase += 1
    report.cleanup_parts = len(live)
    if len(live) > 1:
        pairs = [(i, j) for i in range(len(live)) for j in range(i + 1, len(live))]
        answers = yield from ask(bis_query(live[i], live[j]) for i, j in pairs)
        found = [p for p, a in zip(pairs, answers) if a]
        for i, j in spanning_pairs(len(live), found):
            pseudo.append((live[i], live[j]))
    procs = [det_find_edge_proc(mask_members(a), mask_members(b), r, check=False) for a, b in pseudo]
    edges = yield from parallel(procs)
    return SpanningForest.from_edges(n, edges)


# --------------------------------------------------------------------------
# randomized


class StarPairView:
    """The neighbours of v among ``universe`` as edge slots: OR over pairs {v} x P."""

    kind = Kind.OR

    def __init__(self, v: int, universe):
        self.v = v
        self.universe = list(universe)
        self.n_dims = len(self.universe)

    def __len__(self):
        return self.n_dims

    def query(self, positions, linear=False):
        pairs = [(min(self.v, u), max(self.v, u)) for u in (self.universe[p] for p in positions)]
        return Query(Kind.OR, frozenset(pairs)) if pairs else None

    def true_support(self, instance):
        adj = instance.adj[self.v]
        return np.array([p for p, u in enumerate(self.universe) if (adj >> u) & 1], dtype=np.int64)


class NoEdgesType:
    def __repr__(self):
        return "NoEdges"

    def __bool__(self):
        return False


NO_EDGES = NoEdgesType()


def rand_edges_proc(v: int, S, s: int, seed: int = 0, delta: float = 0.5, kind: Kind = Kind.BIS):
    """One round: up to s uniform edges (with repetition) from v into S.

    Returns ``NO_EDGES`` when the full-rate tests show v has no neighbour
    in S; copies whose sample never isolates one neighbour are dropped.
    """
    S = sorted(S)
    if not S:
        return NO_EDGES
    view = BisView(1 << v, S) if kind is Kind.BIS else StarPairView(v, S)
    fam = SampledBitTests(view, derive_key(seed, v, 0xED6E), s, reps_for(delta))
    (answers,) = yield [fam]
    full = fam.full_answers(answers)
    if not full[:, :, 0].any():
        return NO_EDGES
    return [(v, S[p]) for p in fam.decode(answers) if p >= 0]


def rand_edges(oracle: Oracle, v: int, S, s: int, seed: int = 0, delta: float | None = None):
    n = oracle.n_vertices
    delta = delta if delta is not None else 1.0 / max(n, 2)
    if v in set(S):
        raise ValueError("v must not be in S")
    return oracle.run(rand_edges_proc(v, S, s, seed, delta))


class StarUnionTests(QueryFamily):
    """Sampled subsets of the cut pairs A x A^c, asked as unions of stars.

    Repetition t keeps pair (a, b) at rate 1/2**z for z up to its level.
    The OR over the kept pairs at rate 1/2**z is the OR of the star
    queries ``BIS({a}, B_a)`` over a in A, one BIS query per non-empty
    ``B_a``.
    """

    kind = Kind.BIS

    def __init__(self, A, n: int, key: int, reps: int):
        self.A = sorted(A)
        inside = set(self.A)
        self.Ac = [v for v in range(n) if v not in inside]
        self.n = n
        self.reps = reps
        self.P = n_scales(len(self.A) * len(self.Ac))
        a = np.array(self.A, dtype=np.int64)[:, None]
        b = np.array(self.Ac, dtype=np.int64)[None, :]
        ids = (a * n + b).ravel()
        self.lv = np.stack(
            [leading_zeros(hash_array(derive_key(key, t), ids), self.P - 1).reshape(len(self.A), len(self.Ac))
             for t in range(reps)]
        ).astype(np.int8)
        top = self.lv.max(axis=2) if self.Ac else np.full((reps, len(self.A)), -1)
        self.layout = np.arange(self.P)[None, :, None] <= top[:, None, :]  # (R, P, |A|)
        self._count = int(self.layout.sum())

    def __len__(self):
        return self._count

    def expand(self):
        out = []
        for t, z, i in zip(*np.nonzero(self.layout)):
            members = [self.Ac[j] for j in np.flatnonzero(self.lv[t, i] >= z)]
            out.append(bis_query([self.A[i]], members))
        return out

    def evaluate(self, instance):
        adj = instance.adj
        nb = np.array([[(adj[a] >> b) & 1 for b in self.Ac] for a in self.A], dtype=bool)
        masked = np.where(nb[None], self.lv.astype(np.int16), -1)
        top = masked.max(axis=2) if self.Ac else np.full((self.reps, len(self.A)), -1)
        full = np.arange(self.P)[None, :, None] <= top[:, None, :]
        return full[self.layout]

    def pair_answers(self, answers):
        """OR over stars: whether each (t, z) pair sample met the cut."""
        full = np.zeros(self.layout.shape, dtype=bool)
        full[self.layout] = np.asarray(answers, dtype=bool)
        return full.any(axis=2)


def deg_est_proc(A, n: int, seed: int = 0, delta: float | None = None):
    """One round; a factor-3 estimate of the number of cut pairs, or None if none."""
    A = sorted(A)
    if len(A) >= n:
        return None
    delta = delta if delta is not None else 1.0 / max(n, 2)
    fam = StarUnionTests(A, n, derive_key(seed, A[0], 0xDE6), reps_for(delta))
    (answers,) = yield [fam]
    full = fam.pair_answers(answers)
    if not full[:, 0].any():
        return None
    z = majority_scale(full)
    return 1 if z is None else 2 ** z


def deg_est(oracle: Oracle, A, seed: int = 0, delta: float | None = None) -> int:
    est = oracle.run(deg_est_proc(A, oracle.n_vertices, seed, delta))
    if est is None:
        raise EmptyBoundary()
    return est


def find_nbrs_proc(A, n: int, d: int, seed: int = 0, dense_fallback: bool = True):
    A = sorted(A)
    inside = set(A)
    Ac = [v for v in range(n) if v not in inside]
    got = yield from rand_supp_rec_proc(BisView(to_mask(A), Ac), d, seed, dense_fallback=dense_fallback)
    return frozenset(Ac[p] for p in got)


def find_nbrs(oracle: Oracle, A, d: int, seed: int = 0, dense_fallback: bool = True) -> frozenset:
    return oracle.run(find_nbrs_proc(A, oracle.n_vertices, d, seed, dense_fallback))


def sample_size(n: int, c1: float = 1.0) -> int:
    lg = math.log2(max(n, 2))
    return max(1, math.ceil(c1 * math.ceil(lg * lg)))


def sample_round(n: int, s: int, seed: int, kind: Kind = Kind.BIS, delta: float = 0.5):
    """Round 1 of both randomized algorithms: s edge samples per vertex."""
    procs = [
        rand_edges_proc(v, [u for u in range(n) if u != v], s, derive_key(seed, 1), delta, kind)
        for v in range(n)
    ]
    got = yield from parallel(procs)
    edges = []
    for res in got:
        if res is not NO_EDGES:
            edges.extend(res)
    return edges


def rand_graph_conn_or(oracle: Oracle, seed: int = 0, c1: float = 1.0, c2: float = 1.0) -> SpanningForest:
    n = oracle.n_vertices
    if n == 1:
        idle_rounds(oracle, 2)
        return SpanningForest(1, [])
    s = sample_size(n, c1)
    sampled = oracle.run(sample_round(n, s, seed, Kind.OR))
    dsu = DisjointSetPartition(n)
    for u, v in sampled:
        dsu.union(u, v)
    labels = dsu.labels()
    cross = [(u, w) for u in range(n) for w in range(u + 1, n) if labels[u] != labels[w]]
    M = max(1, math.ceil(c2 * n * max(1, ceil_log2(n))))
    found = oracle.run(rand_supp_rec_proc(PairView(cross), M, derive_key(seed, 2)))
    idle_rounds(oracle, 2)
    return SpanningForest.from_edges(n, sampled + [cross[p] for p in found])


def rand_graph_conn_bis(oracle: Oracle, seed: int = 0, c1: float = 1.0) -> SpanningForest:
    n = oracle.n_vertices
    if n == 1:
        idle_rounds(oracle, 4)
        return SpanningForest(1, [])
    s = sample_size(n, c1)
    sampled = oracle.run(sample_round(n, s, seed, Kind.BIS))
    edges = list(sampled)
    dsu = DisjointSetPartition(n)
    for u, v in sampled:
        dsu.union(u, v)
    parts = dsu.parts()
    # round 2: boundary estimates
    ests = oracle.run(parallel(deg_est_proc(S, n, derive_key(seed, 3, i)) for i, S in enumerate(parts)))
    idle_rounds(oracle, 2)
    open_parts = [i for i, d in enumerate(ests) if d is not None]
    # round 3: vertex neighbours of each open part
    nbrs = oracle.run(parallel(
        find_nbrs_proc(parts[i], n, 3 * ests[i], derive_key(seed, 4, i)) for i in open_parts
    ))
    idle_rounds(oracle, 3)
    owner = {v: i for i, S in enumerate(parts) for v in S}
    witness: dict[tuple[int, int], tuple[int, int]] = {}
    for i, V_i in zip(open_parts, nbrs):
        for w in sorted(V_i):
            j = owner[w]
            key = (min(i, j), max(i, j))
            witness.setdefault(key, (w, i))
    forest = spanning_pairs(len(parts), witness)
    # round 4: one real edge per pseudo-edge of the forest
    delta = 1.0 / max(n, 2) ** 2
    procs = [
        rand_edges_proc(w, parts[i], 1, derive_key(seed, 5, w, i), delta)
        for w, i in (witness[e] for e in forest)
    ]
    got = oracle.run(parallel(procs))
    idle_rounds(oracle, 4)
    for res in got:
        if res is not NO_EDGES:
            edges.extend(res[:1])
    return SpanningForest.from_edges(n, edges)


__all__ = [
    "NoEdge",
    "EmptyBoundary",
    "DisjointSetPartition",
    "SpanningForest",
    "Failure",
    "det_find_edge",
    "det_find_edge_proc",
    "det_graph_conn",
    "det_graph_conn_proc",
    "DetConnReport",
    "rand_edges",
    "rand_edges_proc",
    "deg_est",
    "deg_est_proc",
    "find_nbrs",
    "find_nbrs_proc",
    "rand_graph_conn_or",
    "rand_graph_conn_bis",
    "sample_round",
    "sample_size",
    "NO_EDGES",
]
