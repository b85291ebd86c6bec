"""Hostile oracles that answer OR queries so as to defeat an algorithm.

Both adversaries keep every coordinate either committed (0 or 1) or
still open, answer each round as a batch, and at the end build a concrete
instance that agrees with every answer they gave while contradicting the
algorithm's output.  They refuse batches larger than the budget under
which that is guaranteed to work, instead of answering anyway.

All threshold tests are integer power comparisons: ``a <= N ** (1 - k/r)``
is checked as ``a ** r <= N ** (r - k)``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from ._intmath import ceil_pow
from .oracle import (
    HiddenVector,
    Kind,
    MultiGraph,
    Query,
    QueryError,
    QueryFamily,
    RoundTranscript,
    _answer_item,
)


class BudgetExceeded(QueryError):
    """The batch (or round count) is outside the regime the adversary can win."""


class GuaranteeViolated(AssertionError):
    """A step of the strategy overran the bound its analysis relies on."""


class InvariantViolated(AssertionError):
    pass


class NoAliveClaim(Exception):
    """Every claimed vertex is dead, so no claimed edge can be refuted."""


def _or_items(batch):
    """Flatten a batch to elementary OR queries, remembering item boundaries."""
    flat, sizes = [], []
    for item in batch:
        if item.kind is not Kind.OR:
            raise QueryError(f"adversary answers OR queries only, got {item.kind.value}")
        qs = item.expand() if isinstance(item, QueryFamily) else [item]
        flat.extend(qs)
        sizes.append(len(qs) if isinstance(item, QueryFamily) else None)
    return flat, sizes


def _regroup(answers, sizes):
    out, pos = [], 0
    for s in sizes:
        if s is None:
            out.append(answers[pos])
            pos += 1
        else:
            out.append(np.array(answers[pos:pos + s], dtype=bool))
            pos += s
    return out


def replay(transcript: RoundTranscript, instance) -> list[tuple[int, int]]:
    """Positions ``(round, item)`` where ``instance`` answers differently from the log."""
    bad = []
    for k, rnd in enumerate(transcript.rounds):
        for pos, (item, logged) in enumerate(zip(rnd.batch, rnd.answers)):
            got = _answer_item(instance, item)
            if isinstance(item, QueryFamily):
                same = np.array_equal(np.asarray(got, dtype=bool), np.asarray(logged, dtype=bool))
            else:
                same = bool(got) == bool(logged)
            if not same:
                bad.append((k, pos))
    return bad


# --------------------------------------------------------------------------
# single element recovery


def small(a: int, N: int, r: int, k: int) -> bool:
    """``a <= N ** (1 - k / r)`` in integers."""
    return a ** r <= N ** (r - k)


@dataclass
class LoggedQuery:
    round: int
    cells: frozenset
    answer: bool


class SerAdversary:
    """Adversary against r-round single element recovery over ``[0, N)``.

    Open coordinates form the active set; a query is answered 0 when its
    active part is small for the current round, which commits that part to
    zero.  Zeroing can make other queries small, so the scan repeats until
    nothing changes; what is left is answered 1.
    """

    domain = "vector"

    def __init__(self, N: int, r: int):
        if N < 2 or r < 1:
            raise ValueError("need N >= 2 and r >= 1")
        self.n_dims, self.r = N, r
        self.round = 0
        self.active = set(range(N))
        self.zeros: set[int] = set()
        self.log: list[LoggedQuery] = []

    @property
    def budget(self) -> int:
        """Largest batch the adversary accepts: strictly below ceil(N^(1/r)) - 1."""
        return ceil_pow(self.n_dims, 1, self.r) - 2

    def answer_batch(self, batch):
        flat, sizes = _or_items(batch)
        return _regroup(self.respond([q.payload for q in flat]), sizes)

    def respond(self, queries) -> list[bool]:
        if self.round >= self.r:
            raise BudgetExceeded(f"all {self.r} rounds already used")
        if len(queries) > self.budget:
            raise BudgetExceeded(f"{len(queries)} queries, budget {self.budget}")
        self.round += 1
        N, r, k = self.n_dims, self.r, self.round
        cells = [frozenset(int(i) for i in q) for q in queries]
        answers: list[bool | None] = [None] * len(cells)
        changed = True
        while changed:
            changed = False
            for pos, Q in enumerate(cells):
                if answers[pos] is None and small(len(Q & self.active), N, r, k):
                    answers[pos] = False
                    hit = Q & self.active
                    self.active -= hit
                    self.zeros |= hit
                    changed = changed or bool(hit)
        answers = [a is None for a in answers]
        self.log.extend(LoggedQuery(k, Q, a) for Q, a in zip(cells, answers))
        self.check_invariants()
        return answers

    def check_invariants(self):
        N, r, k = self.n_dims, self.r, self.round
        if self.active & self.zeros or len(self.active) + len(self.zeros) != N:
            raise InvariantViolated("active and zero sets must partition the coordinates")
        for q in self.log:
            if q.answer:
                a = len(q.cells & self.active)
                if small(a, N, r, k):
                    raise InvariantViolated(f"1-query with only {a} active coordinates after round {k}")
            elif q.cells & self.active:
                raise InvariantViolated("0-query still holds an open coordinate")

    def witness(self, claimed: int) -> HiddenVector:
        """All open coordinates but ``claimed`` set to 1, the rest 0."""
        support = self.active - {int(claimed)}
        return HiddenVector.indicator(self.n_dims, support)


# --------------------------------------------------------------------------
# spanning forest


def forest_budget(n: int, r: int) -> int:
    """floor(n^(1+1/r) / (32 r^2 ln n)), the per-round budget the adversary accepts."""
    return math.floor(n ** (1 + 1 / r) / (32 * r * r * math.log(n)))


class ForestAdversary:
    """Adversary against finding one edge at every left vertex of a bipartite graph.

    Vertices ``0..n-1`` form the left side U and ``n..2n-1`` the right
    side V; coordinate ``(u, i)`` is the slot between u and ``n + i``.
    Slots inside a side are never edges.  Per round the adversary kills a
    few vertices (commits all their open slots to 1) so that every query
    touching many vertices, or any vertex touched by many queries, is
    answered 1 with an explanation; the rest is handled one vertex at a
    time like the single element adversary.
    """

    domain = "graph"

    def __init__(self, n: int, r: int, budget: int | None = None):
        if n < 2 or r < 1:
            raise ValueError("need n >= 2 and r >= 1")
        self.n, self.r = n, r
        self.n_vertices = 2 * n
        self.t = forest_budget(n, r) if budget is None else budget
        self.round = 0
        self.active = np.ones((n, n), dtype=bool)
        self.ones = np.zeros((n, n), dtype=bool)
        self.log: list[tuple[int, np.ndarray, np.ndarray, bool]] = []
        self.kills: list[tuple[int, str, int]] = []

    @property
    def broad_threshold(self) -> float:
        return 8 * self.r * math.log(self.n)

    def alive(self) -> np.ndarray:
        return self.active.any(axis=1)

    def cells(self, pairs) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates (u, i) of the cross-side slots in a set of vertex pairs."""
        n = self.n
        us, js = [], []
        for a, b in pairs:
            a, b = (a, b) if a < b else (b, a)
            if a < n <= b:
                us.append(a)
                js.append(b - n)
        return np.array(us, dtype=np.int64), np.array(js, dtype=np.int64)

    def answer_batch(self, batch):
        flat, sizes = _or_items(batch)
        return _regroup(self.respond([self.cells(q.payload) for q in flat]), sizes)

    def is_broad(self, touched: int) -> bool:
        return touched > self.broad_threshold

    def touched(self, q) -> np.ndarray:
        us, js = q
        return np.unique(us[self.active[us, js]])

    def _kill(self, u, why):
        self.ones[u] |= self.active[u]
        self.active[u] = False
        self.kills.append((self.round, why, int(u)))

    def respond(self, queries) -> list[bool]:
        if self.round >= self.r:
            raise BudgetExceeded(f"all {self.r} rounds already used")
        if len(queries) > self.t:
            raise BudgetExceeded(f"{len(queries)} queries, budget {self.t}")
        n, r = self.n, self.r
        k = self.round  # rounds completed so far
        self.round += 1
        answers: list[bool | None] = [None] * len(queries)

        def explained(q):
            us, js = q
            return bool(self.ones[us, js].any())

        for pos, q in enumerate(queries):
            if explained(q):
                answers[pos] = True

        # a small set of alive vertices hits every broad query
        broad = [pos for pos, q in enumerate(queries)
                 if answers[pos] is None and self.is_broad(len(self.touched(q)))]
        cover = greedy_cover([set(self.touched(queries[p]).tolist()) for p in broad])
        if 4 * r * len(cover) > n:
            raise GuaranteeViolated(f"cover of {len(cover)} vertices exceeds n/(4r)")
        for u in cover:
            self._kill(u, "broad")
        for pos, q in enumerate(queries):
            if answers[pos] is None and explained(q):
                answers[pos] = True

        # vertices touched by too many of the remaining narrow queries
        rest = [pos for pos in range(len(queries)) if answers[pos] is None]
        hits = np.zeros(n, dtype=np.int64)
        for pos in rest:
            hits[self.touched(queries[pos])] += 1
        # survivors need (hits + 1) ** r <= n so their zeroing stays bounded
        heavy = np.flatnonzero((hits + 1) ** r > n)
        if 4 * r * len(heavy) > n:
            raise GuaranteeViolated(f"{len(heavy)} heavily touched vertices exceed n/(4r)")
        for u in heavy:
            self._kill(u, "heavy")
        for pos in rest:
            if explained(queries[pos]):
                answers[pos] = True

        # zero small intersections until none is left
        rest = [pos for pos in rest if answers[pos] is None]
        changed = True
        while changed:
            changed = False
            for pos in rest:
                us, js = queries[pos]
                live = self.active[us, js]
                if not live.any():
                    continue
                cnt = np.bincount(us[live], minlength=n)
                for u in np.flatnonzero(cnt):
                    if small(int(cnt[u]), n, r, k + 1):
                        self.active[u, js[live & (us == u)]] = False
                        changed = True
        for pos in rest:
            us, js = queries[pos]
            answers[pos] = bool(self.active[us, js].any())

        for q, a in zip(queries, answers):
            self.log.append((self.round, q[0], q[1], a))
        self.check_invariants()
        return answers

    def unexplained(self):
        for rnd, us, js, a in self.log:
            if a and not self.ones[us, js].any():
                yield rnd, us, js

    def check_invariants(self):
        n, r, k = self.n, self.r, self.round
        if (self.active & self.ones).any():
            raise InvariantViolated("a slot is both open and committed to 1")
        alive = int(self.alive().sum())
        # alive >= n (1 - k / (2r))
        if 2 * r * alive < n * (2 * r - k):
            raise InvariantViolated(f"{alive} alive vertices after round {k}")
        for _, us, js, a in self.log:
            if not a and (self.active[us, js].any() or self.ones[us, js].any()):
                raise InvariantViolated("0-query holds a slot that is not committed to 0")
        for _, us, js in self.unexplained():
            live = self.active[us, js]
            if not live.any():
                raise InvariantViolated("unexplained 1-query has no open slot")
            cnt = np.bincount(us[live], minlength=n)
            for u in np.flatnonzero(cnt):
                if small(int(cnt[u]), n, r, k):
                    raise InvariantViolated(f"unexplained 1-query meets vertex {u} in {cnt[u]} slots")

    def witness(self, claims) -> MultiGraph:
        """A bipartite graph agreeing with every answer but missing one claimed edge.

        ``claims`` maps left vertices to the right-side coordinate claimed
        as a neighbour (``i`` meaning vertex ``n + i``).  The refuted vertex
        is the first alive claimed vertex; its open slots other than the
        claim become edges, as do all open slots of the other vertices.
        """
        alive = self.alive()
        target = next((int(u) for u in sorted(claims) if alive[u]), None)
        if target is None:
            raise NoAliveClaim()
        x = self.ones | self.active
        x[target, int(claims[target])] = False
        us, js = np.nonzero(x)
        return MultiGraph(2 * self.n, [(int(u), self.n + int(j)) for u, j in zip(us, js)])

    def refuted(self, G: MultiGraph, claims) -> list[int]:
        """Claimed vertices whose claimed edge is absent from G."""
        return [u for u, j in sorted(claims.items()) if not G.has_edge(u, self.n + j)]


def greedy_cover(sets: list[set]) -> list[int]:
    """Greedy hitting set: pick elements until every set holds a picked one.

    Ties go to the smaller element, so the choice is deterministic.
    """
    todo = [s for s in sets if s]
    if len(todo) != len(sets):
        raise ValueError("an empty set cannot be hit")
    chosen = []
    while todo:
        counts: dict[int, int] = {}
        for s in todo:
            for e in s:
                counts[e] = counts.get(e, 0) + 1
        best = min(counts, key=lambda e: (-counts[e], e))
        chosen.append(best)
        todo = [s for s in todo if best not in s]
    return chosen


# --------------------------------------------------------------------------
# two cliques


@dataclass
class TwoCliques:
    graph: MultiGraph
    left: list[int]
    right: list[int]
    bridge: tuple[int, int] | None = None
    sibling: MultiGraph | None = field(default=None, repr=False)


def two_clique_split(n: int, seed: int) -> tuple[list[int], list[int]]:
    rng = random.Random(seed)
    while True:
        side = [rng.random() < 0.5 for _ in range(n)]
        left = [v for v in range(n) if side[v]]
        if 0 < len(left) < n:
            return left, [v for v in range(n) if not side[v]]


def _clique_edges(vs):
    return [(vs[a], vs[b]) for a in range(len(vs)) for b in range(a + 1, len(vs))]


def two_clique_pair(n: int, seed: int) -> TwoCliques:
    """The planted instance together with its unplanted sibling."""
    if n < 4:
        raise ValueError("need n >= 4")
    left, right = two_clique_split(n, seed)
    base = _clique_edges(left) + _clique_edges(right)
    rng = random.Random(seed ^ 0x5EED)
    u, v = rng.choice(left), rng.choice(right)
    bridge = (min(u, v), max(u, v))
    return TwoCliques(MultiGraph(n, base + [bridge]), left, right, bridge, MultiGraph(n, base))


def two_clique_instance(n: int, seed: int, planted: bool) -> MultiGraph:
    """Two random cliques, joined by one random edge when ``planted``."""
    pair = two_clique_pair(n, seed)
    return pair.graph if planted else pair.sibling


__all__ = [
    "BudgetExceeded",
    "GuaranteeViolated",
    "InvariantViolated",
    "NoAliveClaim",
    "SerAdversary",
    "ForestAdversary",
    "forest_budget",
    "greedy_cover",
    "replay",
    "two_clique_instance",
    "two_clique_pair",
    "two_clique_split",
    "TwoCliques",
]
