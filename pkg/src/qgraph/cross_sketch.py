"""Partition-Sampler: a one-round Cross-query sketch of a multigraph.

Every unordered pair gets, per repetition i, a top level from a keyed
hash; the pair sample at level z holds the pairs whose top level is at
least z, so samples shrink by half per level.  Sub-sample j of a pair
sample keeps the pairs whose second hash has bit j set.

For each vertex v the sketch stores a signed table: the multiplicity of
sampled edges from v to larger vertices minus the multiplicity to
smaller ones.  Summed over a vertex set S, edges inside S cancel and only
the boundary of S remains, which is what lets one fixed set of queries
answer for any partition.
"""

from __future__ import annotations

import base64
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from ._hashing import derive_key, derive_keys, hash_array, leading_zeros
from ._intmath import ceil_log2
from ._kernels import block_counts, fill_answers, level_masks, pair_split, signed_tables
from .connectivity import DisjointSetPartition, Failure, SpanningForest
from .oracle import Kind, Oracle, QueryFamily, cross_query

LARGER, SMALLER = 0, 1


class SamplerConsumed(Exception):
    pass


class EmptyBoundaryResult:
    def __repr__(self):
        return "EmptyBoundary"


class BotResult:
    def __repr__(self):
        return "Bot"


EMPTY_BOUNDARY = EmptyBoundaryResult()
BOT = BotResult()


@dataclass(frozen=True)
class Edge:
    u: int
    v: int


def default_k(n: int) -> int:
    return 20 * max(1, math.ceil(math.log(max(n, 2))))


def n_levels(n: int) -> int:
    """Levels z = 0..L-1 keep a pair with probability 2**-z, down to 1/C(n,2)."""
    return ceil_log2(max(1, n * (n - 1) // 2)) + 1


class PairSamples:
    """Keyed pair samples for one sampler: top levels and sub-sample bits."""

    def __init__(self, n: int, seed: int, k: int, sub: int):
        if not 1 <= sub <= 63:
            raise ValueError("sub-sample count must be in 1..63")
        self.n, self.seed, self.k, self.sub = n, seed, k, sub
        self.L = n_levels(n)
        if self.L - 1 + sub > 64:
            raise ValueError("too many levels and sub-samples for one 64-bit hash")
        self._keys = derive_keys(derive_key(seed, 0x1E7), k)

    def hashes(self, i, pair_ids):
        return hash_array(self._keys[np.asarray(i)], pair_ids)

    def split(self, h):
        """Top level from the leading bits of a hash, sub-sample mask from its low bits.

        The level reads at most the top L - 1 bits and the mask the low
        ``sub`` bits, so the two are independent.
        """
        return (leading_zeros(h, self.L - 1).astype(np.int8),
                h & np.uint64((1 << self.sub) - 1))

    def levels(self, i, pair_ids):
        """Top level of each pair in repetition(s) i (array of i broadcasts)."""
        return self.split(self.hashes(i, pair_ids))[0]

    def bits(self, i, pair_ids):
        """Sub-sample membership of each pair, as a bit mask over j."""
        return self.split(self.hashes(i, pair_ids))[1]

    def contains(self, z: int, i: int, u: int, v: int, j: int | None = None) -> bool:
        pid = np.array([min(u, v) * self.n + max(u, v)], dtype=np.uint64)
        if self.levels(i, pid)[0] < z:
            return False
        return j is None or bool((int(self.bits(i, pid)[0]) >> j) & 1)


def _all_pairs(n: int):
    u, v = np.triu_indices(n, 1)
    return u.astype(np.int64), v.astype(np.int64)


class SamplerTests(QueryFamily):
    """The Cross queries that fill one sampler's tables.

    Cell ``(v, side, i, j, z)`` asks Cross({v}, C) where C holds the
    vertices on that side of v (larger or smaller) whose pair with v is in
    the level-z sample of repetition i, restricted to sub-sample j for
    ``j < sub`` (``j = sub`` is the whole sample).  Cells with empty C are
    not issued.  Samples are nested, so for each block (v, side, i, j) the
    issued cells are the levels ``0..counts - 1``.
    """

    kind = Kind.CROSS

    def __init__(self, samples: PairSamples):
        self.samples = s = samples
        n, k, L = s.n, s.k, s.L
        self.J = J = s.sub + 1
        u, v = _all_pairs(n)
        if u.size:
            lv, bits = self._pair_data(u, v)
            masks = level_masks(u, v, lv, bits, n, k, L)
            masks = np.bitwise_or.accumulate(masks[:, ::-1], axis=1)[:, ::-1]
            self.counts = block_counts(np.ascontiguousarray(masks), J)
        else:
            self.counts = np.zeros((n * 2 * k, J), dtype=np.int64)
        self.starts = np.concatenate([[0], np.cumsum(self.counts.ravel())]).astype(np.int64)
        self._count = int(self.starts[-1])

    def _pair_data(self, u, v):
        s = self.samples
        pid = (u * s.n + v).astype(np.uint64)
        return pair_split(s._keys, pid, s.L - 1, s.sub)

    def __len__(self):
        return self._count

    def expand(self):
        s = self.samples
        n, k = s.n, s.k
        out = []
        for seg, j in zip(*np.nonzero(self.counts)):
            w, rest = divmod(int(seg), 2 * k)
            side, i = divmod(rest, k)
            others = np.arange(w + 1, n) if side == LARGER else np.arange(0, w)
            lo, hi = np.minimum(others, w), np.maximum(others, w)
            pid = (lo * n + hi).astype(np.uint64)
            lv = s.levels(i, pid)
            if j < s.sub:
                inside = ((s.bits(i, pid) >> np.uint64(j)) & np.uint64(1)).astype(bool)
            else:
                inside = np.ones(len(others), dtype=bool)
            for z in range(self.counts[seg, j]):
                out.append(cross_query([w], others[inside & (lv >= z)].tolist()))
        return out

    def evaluate(self, instance):
        u, v, m = instance.edge_array()
        if len(u) == 0:
            return np.zeros(self._count, dtype=np.int32)
        lv, bits = self._pair_data(u, v)
        return fill_answers(u, v, m.astype(np.int32), lv, bits, self.samples.k, self.J, self.samples.L,
                            self.samples.n, self.starts)

    def tables(self, answers):
        s = self.samples
        ans = np.asarray(answers, dtype=np.int32)
        return signed_tables(ans, self.starts, s.n, s.k, self.J, s.L)


class PartitionSampler:
    """Signed per-vertex tables of shape (n, k, 1 + sub, L); single use.

    Index ``sub`` on the third axis is the whole sample, the others are
    the sub-samples.
    """

    def __init__(self, n: int, seed: int, k: int, sub: int, tables: np.ndarray, consumed: bool = False):
        self.n, self.seed, self.k, self.sub = n, seed, k, sub
        self.samples = PairSamples(n, seed, k, sub)
        self.L = self.samples.L
        self.tables = tables
        self.consumed = consumed

    @classmethod
    def from_answers(cls, tests: SamplerTests, answers):
        s = tests.samples
        tables = tests.tables(answers)
        return cls(s.n, s.seed, s.k, s.sub, tables)

    def part_tables(self, labels) -> tuple[list[int], np.ndarray]:
        """Summed tables per part: (part labels, array of shape (parts, k, 1 + sub, L))."""
        labels = np.asarray(labels)
        order = np.argsort(labels, kind="stable")
        sorted_labels = labels[order]
        starts = np.flatnonzero(np.r_[True, sorted_labels[1:] != sorted_labels[:-1]])
        sums = np.add.reduceat(self.tables[order], starts, axis=0, dtype=np.int32)
        return sorted_labels[starts].tolist(), sums

    def query(self, partition, trace: dict | None = None) -> dict:
        """Per part (keyed by its smallest vertex): Edge, EMPTY_BOUNDARY or BOT.

        With ``trace`` the chosen (level, repetition) per part is recorded.
        """
        if self.consumed:
            raise SamplerConsumed()
        self.consumed = True
        labels = partition.labels() if isinstance(partition, DisjointSetPartition) else list(partition)
        names, sums = self.part_tables(labels)
        members: dict[int, list[int]] = {}
        for v, lab in enumerate(labels):
            members.setdefault(lab, []).append(v)
        out = {}
        for name, t in zip(names, sums):
            parts = members[name]
            out[parts[0]] = self._answer_part(parts, labels, t, trace)
        return out

    def _answer_part(self, part, labels, t, trace):
        if not t.any():
            return EMPTY_BOUNDARY
        main = t[:, self.sub, :]  # (k, L)
        sub = t[:, :self.sub, :].transpose(0, 2, 1)  # (k, L, sub)
        clean = (main != 0) & np.all((sub == 0) | (sub == main[..., None]), axis=-1)
        # scan levels from the sparsest sample down, repetitions in order
        hits = np.argwhere(clean.T[::-1])
        if hits.size == 0:
            return BOT
        zr, i = hits[0]
        z = self.L - 1 - int(zr)
        i = int(i)
        if trace is not None:
            trace[part[0]] = (z, i)
        return self._edge_test(part, labels, z, i, int(main[i, z]), sub[i, z] == main[i, z])

    def _edge_test(self, part, labels, z, i, value, pattern):
        n = self.n
        S = np.asarray(part, dtype=np.int64)
        inside = np.zeros(n, dtype=bool)
        inside[S] = True
        out = np.flatnonzero(~inside)
        a = np.repeat(S, len(out))
        b = np.tile(out, len(S))
        # positive totals come from edges toward larger vertices
        keep = b > a if value > 0 else b < a
        a, b = a[keep], b[keep]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        pid = (lo * n + hi).astype(np.uint64)
        in_sample = self.samples.levels(i, pid) >= z
        lo, hi, pid = lo[in_sample], hi[in_sample], pid[in_sample]
        want = np.uint64(sum(1 << j for j, f in enumerate(pattern) if f))
        match = np.flatnonzero(self.samples.bits(i, pid) == want)
        if len(match) != 1:
            return BOT
        return Edge(int(lo[match[0]]), int(hi[match[0]]))

    # persistence

    def dumps(self) -> bytes:
        buf = io.BytesIO()
        np.savez_compressed(buf, tables=self.tables,
                            meta=np.array([self.n, self.seed, self.k, self.sub, int(self.consumed)], dtype=np.uint64))
        return buf.getvalue()

    @classmethod
    def loads(cls, blob: bytes) -> "PartitionSampler":
        with np.load(io.BytesIO(blob)) as data:
            n, seed, k, sub, consumed = (int(x) for x in data["meta"])
            return cls(n, seed, k, sub, data["tables"], bool(consumed))

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n, "seed": self.seed, "k": self.k, "sub": self.sub,
            "consumed": self.consumed, "shape": list(self.tables.shape),
            "tables": base64.b64encode(self.tables.astype("<i4").tobytes()).decode("ascii"),
        })

    @classmethod
    def from_json(cls, text: str) -> "PartitionSampler":
        d = json.loads(text)
        raw = np.frombuffer(base64.b64decode(d["tables"]), dtype="<i4")
        tables = raw.reshape(d["shape"]).astype(np.int32)
        return cls(d["n"], d["seed"], d["k"], d["sub"], tables, d["consumed"])


def build_sampler_proc(n: int, seed: int, k: int | None = None, sub: int = 24):
    tests = SamplerTests(PairSamples(n, seed, k or default_k(n), sub))
    (answers,) = yield [tests]
    return PartitionSampler.from_answers(tests, answers)


def build_sampler(oracle: Oracle, n: int | None = None, seed: int = 0, k: int | None = None,
                  sub: int = 24) -> PartitionSampler:
    n = n or oracle.n_vertices
    return oracle.run(build_sampler_proc(n, seed, k, sub))


def sampler_query(sampler: PartitionSampler, partition, trace: dict | None = None) -> dict:
    return sampler.query(partition, trace)


def n_samplers(n: int) -> int:
    return ceil_log2(max(n, 2)) + 2


def rand_graph_conn_cross(oracle: Oracle, seed: int = 0, k: int | None = None, sub: int = 24,
                          samplers: int | None = None):
    """Spanning forest from one round of Cross queries, or Failure."""
    n = oracle.n_vertices
    if n == 1:
        oracle.idle()
        return SpanningForest(1, [])
    t = samplers or n_samplers(n)
    k = k or default_k(n)
    tests = [SamplerTests(PairSamples(n, derive_key(seed, s), k, sub)) for s in range(t)]
    if not any(len(x) for x in tests):
        oracle.idle()
        return SpanningForest(n, [])
    answers = oracle.commit(tests)
    sketches = [PartitionSampler.from_answers(x, a) for x, a in zip(tests, answers)]
    dsu = DisjointSetPartition(n)
    edges = []
    done: set[int] = set()
    for sk in sketches:
        labels = dsu.labels()
        result = sk.query(labels)
        live = 0
        for name, res in result.items():
            if name in done:
                continue
            if res is EMPTY_BOUNDARY:
                done.add(name)
            elif res is BOT:
                return Failure("sampler returned no edge for a live part", SpanningForest.from_edges(n, edges))
            else:
                live += 1
                edges.append((res.u, res.v))
        for u, v in edges:
            dsu.union(u, v)
        if live == 0:
            return SpanningForest.from_edges(n, edges)
        # labels of finished parts never change, since their boundary is empty
    return Failure("ran out of samplers", SpanningForest.from_edges(n, edges))


__all__ = [
    "SamplerConsumed",
    "EMPTY_BOUNDARY",
    "BOT",
    "Edge",
    "PairSamples",
    "SamplerTests",
    "PartitionSampler",
    "build_sampler",
    "build_sampler_proc",
    "sampler_query",
    "rand_graph_conn_cross",
    "default_k",
    "n_levels",
    "n_samplers",
]
