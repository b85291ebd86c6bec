"""Hidden instances, the four query types, and round-batched accounting.

A hidden instance (a non-negative vector or an undirected multigraph) is
only reachable through :func:`commit_round`, which evaluates a whole batch
of queries at once and appends it to a :class:`RoundTranscript`.  Answers
to a batch are never visible before the batch is complete, so an
algorithm's number of rounds is exactly the number of commits it makes.

Algorithms are written as generators: each ``yield`` hands over one batch
and receives the answers.  :class:`Oracle` drives such a generator, and
:func:`parallel` merges several generators into shared rounds.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np


class QueryError(Exception):
    pass


class MixedInstanceKind(QueryError):
    pass


class EmptyBatch(QueryError):
    pass


class NegativeWeight(QueryError):
    pass


class IndexOutOfRange(QueryError):
    pass


class SetsNotDisjoint(QueryError):
    pass


class EmptySet(QueryError):
    pass


class Kind(enum.Enum):
    LINEAR = "linear"
    OR = "or"
    CROSS = "cross"
    BIS = "bis"


def to_rational(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator()
    return Fraction(value)


def to_mask(vertices) -> int:
    if isinstance(vertices, (int, np.integer)):
        return int(vertices)
    mask = 0
    for v in vertices:
        mask |= 1 << int(v)
    return mask


def mask_members(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _pair(u, v):
    u, v = int(u), int(v)
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Query:
    """One elementary query.

    Payloads: Linear holds a tuple of ``(index, weight)``; OR holds a
    frozenset of indices (vector) or of vertex pairs (graph edge slots);
    Cross and BIS hold two vertex bitmasks ``(A, B)``.
    """

    kind: Kind
    payload: object

    def __len__(self):
        return 1

    def sides(self):
        a, b = self.payload
        return frozenset(mask_members(a)), frozenset(mask_members(b))


def linear_query(weights: Mapping[int, object]) -> Query:
    items = tuple(sorted((int(i), to_rational(w)) for i, w in weights.items()))
    return Query(Kind.LINEAR, items)


def or_query(indices: Iterable) -> Query:
    cells = []
    for s in indices:
        if isinstance(s, tuple):
            cells.append(_pair(*s))
        else:
            cells.append(int(s))
    return Query(Kind.OR, frozenset(cells))


def cross_query(A, B) -> Query:
    return Query(Kind.CROSS, (to_mask(A), to_mask(B)))


def bis_query(A, B) -> Query:
    return Query(Kind.BIS, (to_mask(A), to_mask(B)))


class QueryFamily:
    """A batch item standing for many elementary queries of one kind.

    Subclasses describe the member queries compactly, count them exactly
    (``len``), list them explicitly (``expand``) and answer all of them at
    once from the hidden instance (``evaluate``).  The answers come back
    as one array in ``expand`` order.  Tests check ``evaluate`` against
    the expanded queries on small instances.
    """

    kind: Kind = Kind.OR

    def __len__(self) -> int:
        raise NotImplementedError

    def expand(self) -> list[Query]:
        raise NotImplementedError

    def evaluate(self, instance) -> np.ndarray:
        raise NotImplementedError


class HiddenVector:
    """A secret non-negative vector with exact rational entries."""

    domain = "vector"

    def __init__(self, n_dims: int, entries: Mapping[int, object] | None = None):
        if n_dims < 1:
            raise ValueError("n_dims must be positive")
        self.n_dims = int(n_dims)
        self._entries: dict[int, Fraction] = {}
        for i, value in (entries or {}).items():
            i = int(i)
            if not 0 <= i < self.n_dims:
                raise IndexOutOfRange(i)
            value = to_rational(value)
            if value < 0:
                raise ValueError(f"negative entry at {i}")
            if value > 0:
                self._entries[i] = value
        self._support = frozenset(self._entries)

    @classmethod
    def indicator(cls, n_dims: int, support: Iterable[int]):
        return cls(n_dims, {i: 1 for i in support})

    def support(self) -> frozenset:
        return self._support

    def value(self, i: int) -> Fraction:
        return self._entries.get(int(i), Fraction(0))

    def items(self):
        return sorted(self._entries.items())

    def answer_batch(self, batch):
        return [_answer_item(self, item) for item in batch]

    def __eq__(self, other):
        return (
            isinstance(other, HiddenVector)
            and self.n_dims == other.n_dims
            and self._entries == other._entries
        )

    def __repr__(self):
        return f"HiddenVector(n_dims={self.n_dims}, support={sorted(self._support)})"


class MultiGraph:
    """A secret undirected multigraph on vertices ``0..n-1``."""

    domain = "graph"

    def __init__(self, n_vertices: int, edges=()):
        if n_vertices < 1:
            raise ValueError("n_vertices must be positive")
        n = self.n_vertices = int(n_vertices)
        mult: dict[tuple[int, int], int] = {}
        items = edges.items() if isinstance(edges, Mapping) else edges
        for e in items:
            if len(e) == 2 and isinstance(e[0], tuple):
                (u, v), m = e
            elif len(e) == 2:
                (u, v), m = e, 1
            else:
                u, v, m = e
            u, v, m = int(u), int(v), int(m)
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise IndexOutOfRange((u, v))
            if m < 1:
                raise ValueError("multiplicity must be at least 1")
            key = _pair(u, v)
            mult[key] = mult.get(key, 0) + m
        self.edges = mult
        self.adj = [0] * n
        for u, v in mult:
            self.adj[u] |= 1 << v
            self.adj[v] |= 1 << u
        self.simple = all(m == 1 for m in mult.values())
        self._matrix = None

    def multiplicity(self, u: int, v: int) -> int:
        if u == v:
            return 0
        return self.edges.get(_pair(u, v), 0)

    def has_edge(self, u: int, v: int) -> bool:
        return self.multiplicity(u, v) > 0

    def neighbors(self, v: int) -> list[int]:
        return mask_members(self.adj[v])

    def degree(self, v: int) -> int:
        return sum(self.multiplicity(v, u) for u in self.neighbors(v))

    def n_edges(self, multiplicity: bool = True) -> int:
        return sum(self.edges.values()) if multiplicity else len(self.edges)

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            m = np.zeros((self.n_vertices, self.n_vertices), dtype=np.int64)
            for (u, v), k in self.edges.items():
                m[u, v] = m[v, u] = k
            self._matrix = m
        return self._matrix

    def edge_array(self):
        """Edges as parallel arrays ``(u, v, m)`` with ``u < v``."""
        if not self.edges:
            z = np.zeros(0, dtype=np.int64)
            return z, z, z
        keys = sorted(self.edges)
        u = np.array([k[0] for k in keys], dtype=np.int64)
        v = np.array([k[1] for k in keys], dtype=np.int64)
        m = np.array([self.edges[k] for k in keys], dtype=np.int64)
        return u, v, m

    def components(self) -> list[int]:
        """Component label per vertex (smallest vertex of the component)."""
        label = [-1] * self.n_vertices
        for s in range(self.n_vertices):
            if label[s] >= 0:
                continue
            label[s] = s
            todo = deque([s])
            while todo:
                u = todo.popleft()
                for w in mask_members(self.adj[u]):
                    if label[w] < 0:
                        label[w] = s
                        todo.append(w)
        return label

    def answer_batch(self, batch):
        return [_answer_item(self, item) for item in batch]

    def __eq__(self, other):
        return (
            isinstance(other, MultiGraph)
            and self.n_vertices == other.n_vertices
            and self.edges == other.edges
        )

    def __repr__(self):
        return f"MultiGraph(n={self.n_vertices}, pairs={len(self.edges)})"


def _check_domain(instance, item):
    kind = item.kind
    domain = getattr(instance, "domain", None)
    if domain == "vector" and kind in (Kind.CROSS, Kind.BIS):
        raise MixedInstanceKind(f"{kind.value} query against a vector")
    if domain == "graph" and kind is Kind.LINEAR:
        raise MixedInstanceKind("linear query against a graph")


def _answer_item(instance, item):
    _check_domain(instance, item)
    if isinstance(item, QueryFamily):
        return item.evaluate(instance)
    if item.kind is Kind.LINEAR:
        return eval_linear(instance, dict(item.payload))
    if item.kind is Kind.OR:
        return eval_or(instance, item.payload)
    a, b = item.payload
    if item.kind is Kind.CROSS:
        return eval_cross(instance, a, b)
    return eval_bis(instance, a, b)


def eval_linear(x: HiddenVector, w: Mapping[int, object]) -> Fraction:
    total = Fraction(0)
    for i, weight in w.items():
        weight = to_rational(weight)
        if weight < 0:
            raise NegativeWeight(i)
        if not 0 <= int(i) < x.n_dims:
            raise IndexOutOfRange(i)
        if weight:
            total += weight * x.value(i)
    return total


def eval_or(x, S) -> bool:
    """OR over coordinates of a vector, or over edge slots of a graph."""
    S = S if isinstance(S, (set, frozenset)) else set(S)
    if isinstance(x, MultiGraph):
        for cell in S:
            if not isinstance(cell, tuple):
                raise MixedInstanceKind("OR over a graph needs vertex pairs")
            u, v = cell
            if not (0 <= u < x.n_vertices and 0 <= v < x.n_vertices):
                raise IndexOutOfRange(cell)
        return any(x.multiplicity(*cell) for cell in S)
    for i in S:
        if isinstance(i, tuple):
            raise MixedInstanceKind("pair OR against a vector")
        if not 0 <= i < x.n_dims:
            raise IndexOutOfRange(i)
    supp = x.support()
    if len(S) < len(supp):
        return any(i in supp for i in S)
    return any(i in S for i in supp)


def _check_sides(G: MultiGraph, a: int, b: int):
    if a == 0 or b == 0:
        raise EmptySet()
    if a & b:
        raise SetsNotDisjoint()
    if (a | b) >> G.n_vertices:
        raise IndexOutOfRange("vertex outside graph")


def eval_cross(G: MultiGraph, A, B) -> int:
    a, b = to_mask(A), to_mask(B)
    _check_sides(G, a, b)
    if a.bit_count() > b.bit_count():
        a, b = b, a
    total = 0
    for u in mask_members(a):
        hit = G.adj[u] & b
        if not hit:
            continue
        if G.simple:
            total += hit.bit_count()
        else:
            total += sum(G.edges[_pair(u, w)] for w in mask_members(hit))
    return total


def eval_bis(G: MultiGraph, A, B) -> bool:
    a, b = to_mask(A), to_mask(B)
    _check_sides(G, a, b)
    if a.bit_count() > b.bit_count():
        a, b = b, a
    adj = G.adj
    while a:
        low = a & -a
        if adj[low.bit_length() - 1] & b:
            return True
        a ^= low
    return False


class Round(NamedTuple):
    batch: list
    answers: list
    count: int


class TranscriptStats(NamedTuple):
    rounds_used: int
    per_round_counts: list
    total: int
    max_per_round: int


class RoundTranscript:
    """Append-only log of committed rounds."""

    def __init__(self):
        self.rounds: list[Round] = []

    def record(self, batch, answers):
        count = sum(len(item) for item in batch)
        self.rounds.append(Round(list(batch), list(answers), count))

    def idle(self):
        """Record a scheduled round in which nothing was left to ask."""
        self.rounds.append(Round([], [], 0))

    @property
    def per_round_counts(self) -> list[int]:
        return [r.count for r in self.rounds]

    @property
    def total(self) -> int:
        return sum(self.per_round_counts)

    @property
    def rounds_used(self) -> int:
        return len(self.rounds)

    def kinds(self) -> set:
        return {item.kind for r in self.rounds for item in r.batch}

    def __len__(self):
        return len(self.rounds)


def commit_round(instance, transcript: RoundTranscript, batch: Sequence) -> list:
    batch = list(batch)
    if not batch or not any(len(item) for item in batch):
        raise EmptyBatch()
    answers = instance.answer_batch(batch)
    transcript.record(batch, answers)
    return answers


def transcript_stats(t: RoundTranscript) -> TranscriptStats:
    counts = t.per_round_counts
    return TranscriptStats(len(counts), counts, sum(counts), max(counts, default=0))


class Oracle:
    """An instance bound to its own transcript."""

    def __init__(self, instance, transcript: RoundTranscript | None = None):
        self.instance = instance
        self.transcript = transcript if transcript is not None else RoundTranscript()

    def commit(self, batch):
        return commit_round(self.instance, self.transcript, batch)

    def idle(self):
        self.transcript.idle()

    def run(self, proc):
        """Drive a procedure generator to completion and return its result."""
        try:
            batch = next(proc)
            while True:
                batch = proc.send(self.commit(batch))
        except StopIteration as stop:
            return stop.value

    def stats(self) -> TranscriptStats:
        return transcript_stats(self.transcript)

    @property
    def n_dims(self):
        return getattr(self.instance, "n_dims", None)

    @property
    def n_vertices(self):
        return getattr(self.instance, "n_vertices", None)


def ask(items):
    """Issue one round of possibly-vacuous queries.

    ``None`` entries stand for queries over an empty set; they are answered
    ``False`` locally and cost nothing.  If every entry is vacuous no round
    is used at all.
    """
    items = list(items)
    live = [q for q in items if q is not None]
    answers = (yield live) if live else []
    it = iter(answers)
    return [False if q is None else next(it) for q in items]


def parallel(procs):
    """Run procedure generators side by side, sharing rounds.

    Each round concatenates the pending batches of all unfinished
    procedures; answers are split back in order.  Returns the list of
    results.
    """
    procs = list(procs)
    results = [None] * len(procs)
    pending = {}
    for i, p in enumerate(procs):
        try:
            pending[i] = next(p)
        except StopIteration as stop:
            results[i] = stop.value
    while pending:
        order = list(pending)
        merged = []
        for i in order:
            merged.extend(pending[i])
        answers = yield merged
        pos = 0
        for i in order:
            k = len(pending[i])
            part = answers[pos:pos + k]
            pos += k
            try:
                pending[i] = procs[i].send(part)
            except StopIteration as stop:
                results[i] = stop.value
                del pending[i]
    return results


def idle_rounds(oracle: Oracle, scheduled: int):
    """Pad a fixed-schedule run so unused scheduled rounds are recorded."""
    while oracle.transcript.rounds_used < scheduled:
        oracle.idle()


class VectorView:
    """OR (or Linear) access to positions ``0..N-1`` of a hidden vector.

    Position ``p`` is coordinate ``index[p]`` of the instance (identity
    when ``index`` is omitted).
    """

    kind = Kind.OR

    def __init__(self, n_dims: int, index: Sequence[int] | None = None):
        self.index = None if index is None else list(index)
        self.n_dims = len(self.index) if self.index is not None else int(n_dims)

    def __len__(self):
        return self.n_dims

    def coord(self, p):
        return p if self.index is None else self.index[p]

    def query(self, positions, linear: bool = False):
        positions = list(positions)
        if linear:
            return linear_query({self.coord(p): 1 for p in positions})
        if not positions:
            return None
        return or_query(self.coord(p) for p in positions)

    def true_support(self, instance) -> np.ndarray:
        supp = instance.support()
        if self.index is None:
            return np.array(sorted(supp), dtype=np.int64)
        return np.array([p for p, i in enumerate(self.index) if i in supp], dtype=np.int64)


class BisView:
    """The vector ``x_p = #edges(universe[p], A)`` seen through BIS queries.

    An OR over positions ``P`` is the query ``BIS(A, {universe[p] : p in P})``.
    """

    kind = Kind.BIS

    def __init__(self, A, universe: Sequence[int]):
        self.a_mask = to_mask(A)
        self.universe = list(universe)
        self.n_dims = len(self.universe)

    def __len__(self):
        return self.n_dims

    def query(self, positions, linear: bool = False):
        if linear:
            raise MixedInstanceKind("BIS view has no linear queries")
        b = 0
        for p in positions:
            b |= 1 << self.universe[p]
        if b == 0:
            return None
        return Query(Kind.BIS, (self.a_mask, b))

    def true_support(self, instance) -> np.ndarray:
        adj, a = instance.adj, self.a_mask
        return np.array(
            [p for p, u in enumerate(self.universe) if adj[u] & a], dtype=np.int64
        )


class PairView:
    """The edge-slot vector of a graph restricted to a list of vertex pairs."""

    kind = Kind.OR

    def __init__(self, pairs: Sequence[tuple[int, int]]):
        self.pairs = [_pair(*p) for p in pairs]
        self.n_dims = len(self.pairs)

    def __len__(self):
        return self.n_dims

    def query(self, positions, linear: bool = False):
        if linear:
            raise MixedInstanceKind("pair view has no linear queries")
        positions = list(positions)
        if not positions:
            return None
        return Query(Kind.OR, frozenset(self.pairs[p] for p in positions))

    def true_support(self, instance) -> np.ndarray:
        return np.array(
            [p for p, e in enumerate(self.pairs) if e in instance.edges], dtype=np.int64
        )


def read_graph(path) -> MultiGraph:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0][0] != "n":
        raise ValueError("graph file must start with 'n <count>'")
    n = int(lines[0][1])
    edges = []
    for parts in lines[1:]:
        u, v = int(parts[0]), int(parts[1])
        m = int(parts[2]) if len(parts) > 2 else 1
        edges.append((u, v, m))
    return MultiGraph(n, edges)


def write_graph(G: MultiGraph, path):
    with open(path, "w") as fh:
        fh.write(f"n {G.n_vertices}\n")
        for (u, v), m in sorted(G.edges.items()):
            fh.write(f"{u} {v} {m}\n")


def read_vector(path) -> HiddenVector:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0][0] != "N":
        raise ValueError("vector file must start with 'N <dims>'")
    n = int(lines[0][1])
    entries: dict[int, Fraction] = {}
    for i, value in lines[1:]:
        entries[int(i)] = entries.get(int(i), Fraction(0)) + Fraction(value)
    return HiddenVector(n, entries)


def write_vector(x: HiddenVector, path):
    with open(path, "w") as fh:
        fh.write(f"N {x.n_dims}\n")
        for i, value in x.items():
            fh.write(f"{i} {value.numerator}/{value.denominator}\n")
