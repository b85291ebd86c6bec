"""Recovering support elements of a hidden vector with OR queries.

Every algorithm here exists in two forms.  The ``*_proc`` generators work
on a *view* (see :mod:`qgraph.oracle`): positions ``0..N-1`` of some
vector whose OR queries the view knows how to phrase, so the same code
serves a hidden vector, BIS queries against a vertex set, or edge slots of
a graph.  The plain functions bind a procedure to an :class:`Oracle` over
a :class:`HiddenVector` and return the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._galois import field_tables
from ._hashing import derive_key, derive_keys, hash_array, leading_zeros
from ._intmath import ceil_log, ceil_log2, ceil_pow, floor_pow, prime_power
from .oracle import Oracle, QueryFamily, VectorView, ask, parallel


class ZeroVector(Exception):
    pass


class MatrixConstructionFailed(Exception):
    pass


@dataclass(frozen=True)
class SupportResult:
    """Either the exact support (``support`` set) or a too-large verdict."""

    support: frozenset | None

    @property
    def exact(self) -> bool:
        return self.support is not None

    @property
    def too_large(self) -> bool:
        return self.support is None

    def __repr__(self):
        if self.support is None:
            return "TooLarge"
        return f"Exact({sorted(self.support)})"


TOO_LARGE = SupportResult(None)


def Exact(indices) -> SupportResult:
    return SupportResult(frozenset(int(i) for i in indices))


# --------------------------------------------------------------------------
# binary search


def binary_search_proc(view, r: int, validate_nonzero: bool = False, blocks: int | None = None):
    """Find one support position in at most ``r`` rounds.

    Each round splits the live range into at most ``blocks`` blocks of size
    ``ceil(len / blocks)`` (default ``blocks = ceil(N ** (1/r))``) and asks
    all but the last; the last block is taken by elimination.  With a
    reduced ``blocks`` the range may not shrink to one position, in which
    case the last position is returned as a guess.

    Returns the position, or ``None`` if ``validate_nonzero`` found x = 0.
    """
    N = len(view)
    if N == 0:
        return None
    k = blocks if blocks is not None else ceil_pow(N, 1, r)
    k = max(2, k)
    lo, hi = 0, N
    first = True
    for _ in range(r):
        if hi - lo <= 1:
            break
        size = hi - lo
        step = -(-size // k)
        starts = list(range(lo, hi, step))
        qs = [view.query(range(s, min(s + step, hi))) for s in starts[:-1]]
        if first and validate_nonzero:
            qs.append(view.query(range(N)))
        answers = yield from ask(qs)
        if first and validate_nonzero:
            if not answers.pop():
                return None
        first = False
        hit = next((i for i, a in enumerate(answers) if a), None)
        if hit is None:
            lo = starts[-1]
        else:
            lo, hi = starts[hit], starts[hit] + step
    if first and validate_nonzero:
        answers = yield from ask([view.query(range(N))])
        if not answers[0]:
            return None
    return hi - 1


def binary_search(oracle: Oracle, r: int, validate_nonzero: bool = False, blocks: int | None = None) -> int:
    view = VectorView(oracle.n_dims)
    j = oracle.run(binary_search_proc(view, r, validate_nonzero, blocks))
    if j is None:
        raise ZeroVector()
    return j


# --------------------------------------------------------------------------
# disjunct matrices


@dataclass(frozen=True)
class DisjunctMatrix:
    """A non-adaptive test design: ``tests[t]`` is the index set probed by test t."""

    n_cols: int
    d: int
    tests: tuple
    method: str

    @property
    def rows(self) -> int:
        return len(self.tests)

    def incidence(self) -> np.ndarray:
        inc = np.zeros((self.rows, self.n_cols), dtype=bool)
        for t, members in enumerate(self.tests):
            inc[t, list(members)] = True
        return inc

    def columns(self) -> list[frozenset]:
        cols = [set() for _ in range(self.n_cols)]
        for t, members in enumerate(self.tests):
            for j in members:
                cols[j].add(t)
        return [frozenset(c) for c in cols]


def bit_matrix(N: int) -> DisjunctMatrix:
    """Bit tests and complement bit tests: 1-disjunct with 2*ceil(log2 N) rows."""
    bits = max(1, ceil_log2(N))
    tests = []
    for b in range(bits):
        for value in (0, 1):
            members = frozenset(j for j in range(N) if (j >> b) & 1 == value)
            if members:
                tests.append(members)
    return DisjunctMatrix(N, 1, tuple(tests), "bits")


def identity_matrix(N: int, d: int) -> DisjunctMatrix:
    return DisjunctMatrix(N, d, tuple(frozenset([j]) for j in range(N)), "identity")


def ks_field_size(N: int, d: int) -> int:
    """Smallest prime power q with q >= d * ceil(log_q N) + 1."""
    q = 2
    while True:
        if prime_power(q) is not None and q >= d * max(1, ceil_log(N, q)) + 1:
            return q
        q += 1


def kautz_singleton(N: int, d: int) -> DisjunctMatrix:
    """Reed-Solomon outer code over GF(q) with the identity inner code.

    Column j is the polynomial whose coefficients are the base-q digits of
    j, evaluated at every field element; test ``(a, s)`` holds the columns
    whose polynomial takes value s at a.  Two columns agree in at most
    k-1 places, so d others cover at most d(k-1) < q tests of a column.
    """
    q = ks_field_size(N, d)
    k = max(1, ceil_log(N, q))
    add, mul = field_tables(q)
    cols = np.arange(N)
    coeffs = [(cols // q ** e) % q for e in range(k)]
    tests = []
    for a in range(q):
        value = np.zeros(N, dtype=np.int64)
        for c in reversed(coeffs):  # Horner
            value = add[mul[value, a], c]
        for s in range(q):
            members = frozenset(np.flatnonzero(value == s).tolist())
            if members:
                tests.append(members)
    return DisjunctMatrix(N, d, tuple(tests), "kautz-singleton")


def random_disjunct(N: int, d: int, seed: int = 0, rows: int | None = None, tries: int = 50) -> DisjunctMatrix:
    """Seeded Bernoulli(1/(d+1)) design, kept only if it verifies d-disjunct."""
    rows = rows or max(1, math.ceil(3 * (d + 1) ** 2 * math.log(max(N, 2))))
    rng = np.random.default_rng(seed)
    for _ in range(tries):
        inc = rng.random((rows, N)) < 1.0 / (d + 1)
        tests = tuple(frozenset(np.flatnonzero(row).tolist()) for row in inc)
        m = DisjunctMatrix(N, d, tuple(t for t in tests if t), "random")
        if is_d_disjunct(m, d):
            return m
    raise MatrixConstructionFailed(f"no verified random design for N={N}, d={d}")


MAX_FIELD = 1 << 10


@lru_cache(maxsize=512)
def disjunct_matrix(N: int, d: int, method: str = "auto") -> DisjunctMatrix:
    """A d-disjunct design on N columns.

    ``auto`` takes the bit design for d = 1 and Kautz-Singleton otherwise,
    unless probing every column (the identity design) needs fewer tests.
    """
    if N < 1 or d < 1:
        raise MatrixConstructionFailed(f"N={N}, d={d}")
    if method == "identity":
        return identity_matrix(N, d)
    if method == "random":
        return random_disjunct(N, d)
    if method == "bits" or (method in ("auto", "ks") and d == 1):
        m = bit_matrix(N)
    elif method in ("auto", "ks"):
        if ks_field_size(N, d) > MAX_FIELD:
            return random_disjunct(N, d)
        m = kautz_singleton(N, d)
    else:
        raise MatrixConstructionFailed(f"unknown method {method}")
    if method == "auto" and m.rows >= N:
        return identity_matrix(N, d)
    return m


def is_d_disjunct(matrix: DisjunctMatrix, d: int | None = None) -> bool:
    """Brute-force check that no column is covered by d other columns."""
    d = matrix.d if d is None else d
    cols = matrix.columns()
    for j, cj in enumerate(cols):
        if not cj:
            return False
        pos = {t: b for b, t in enumerate(sorted(cj))}
        full = (1 << len(pos)) - 1
        masks = set()
        for i, ci in enumerate(cols):
            if i != j:
                m = 0
                for t in ci & cj:
                    m |= 1 << pos[t]
                if m:
                    masks.add(m)
        if masks and _coverable(full, _maximal(masks), d):
            return False
    return True


def _maximal(masks):
    ms = sorted(masks, key=lambda m: -m.bit_count())
    keep = []
    for m in ms:
        if not any(m | k == k for k in keep):
            keep.append(m)
    return keep


def _coverable(full, masks, d):
    if full == 0:
        return True
    if d == 0:
        return False
    low = full & -full
    return any(_coverable(full & ~m, masks, d - 1) for m in masks if m & low)


def decode(matrix: DisjunctMatrix, outcomes, d: int | None = None) -> SupportResult:
    """Candidates are columns all of whose tests fired; reverify them."""
    d = matrix.d if d is None else d
    outcomes = np.asarray(outcomes, dtype=bool)
    inc = matrix.incidence()
    cand = ~(inc & ~outcomes[:, None]).any(axis=0)
    idx = np.flatnonzero(cand)
    if len(idx) > d:
        return TOO_LARGE
    recomputed = inc[:, idx].any(axis=1)
    if not np.array_equal(recomputed, outcomes):
        return TOO_LARGE
    return Exact(idx.tolist())


def bnd_supp_rec_proc(view, d: int, linear: bool = False, method: str = "auto"):
    """One round: recover the whole support if it has at most d positions."""
    N = len(view)
    if N == 0:
        return Exact([])
    m = disjunct_matrix(N, min(d, N), method)
    qs = [view.query(sorted(t), linear=linear) for t in m.tests]
    answers = yield from ask(qs)
    outcomes = [a > 0 if linear else bool(a) for a in answers]
    res = decode(m, outcomes, d)
    return res


def bnd_supp_rec(oracle: Oracle, d: int, backend: str = "or", method: str = "auto") -> SupportResult:
    """Bounded support recovery; ``backend='linear'`` phrases tests as indicator sums."""
    view = VectorView(oracle.n_dims)
    return oracle.run(bnd_supp_rec_proc(view, d, linear=(backend == "linear"), method=method))


# --------------------------------------------------------------------------
# finding many support elements deterministically


def find_many_target(N: int, r: int, c: int) -> int:
    return max(1, floor_pow(N, c, 4 * r))


def det_find_many_proc(view, r: int, c: int, target: int | None = None, blocks: int | None = None):
    """Return at least min(target, |supp|) support positions in ceil(2r/c) rounds.

    Returns an empty set exactly when the vector is zero.
    """
    N = len(view)
    if N == 0:
        return frozenset()
    if not 1 <= c < r:
        raise ValueError("need 1 <= c < r")
    target = target or find_many_target(N, r, c)
    k = max(2, blocks or ceil_pow(N, c, 2 * r))
    n_rounds = -(-2 * r // c)
    current = list(range(N))
    found: set[int] = set()
    for rnd in range(n_rounds):
        if rnd == n_rounds - 1 or len(current) <= k:
            answers = yield from ask(view.query([p]) for p in current)
            found.update(p for p, a in zip(current, answers) if a)
            return frozenset(found)
        step = -(-len(current) // k)
        chunks = [current[s:s + step] for s in range(0, len(current), step)]
        procs = [bnd_supp_rec_proc(_SubView(view, ch), target) for ch in chunks]
        results = yield from parallel(procs)
        heavy = None
        for ch, res in zip(chunks, results):
            if res.exact:
                found.update(ch[p] for p in res.support)
            elif heavy is None:
                heavy = ch
        if heavy is None or len(found) >= target:
            return frozenset(found)
        current = heavy
    return frozenset(found)


def det_find_many(oracle: Oracle, r: int, c: int, target: int | None = None) -> frozenset:
    view = VectorView(oracle.n_dims)
    out = oracle.run(det_find_many_proc(view, r, c, target))
    if not out:
        raise ZeroVector()
    return out


class _SubView:
    """Positions of a parent view restricted to a list of its positions."""

    def __init__(self, parent, positions):
        self.parent = parent
        self.positions = list(positions)
        self.kind = parent.kind
        self.n_dims = len(self.positions)

    def __len__(self):
        return self.n_dims

    def query(self, positions, linear: bool = False):
        return self.parent.query([self.positions[p] for p in positions], linear=linear)

    def true_support(self, instance):
        parent = set(self.parent.true_support(instance).tolist())
        return np.array([p for p, q in enumerate(self.positions) if q in parent], dtype=np.int64)


def subview(view, positions):
    return _SubView(view, positions)


# --------------------------------------------------------------------------
# randomized designs


def n_scales(N: int) -> int:
    """Sampling rates 1, 1/2, ..., 1/2**(P-1) with 2**(P-1) >= N."""
    return ceil_log2(max(N, 1)) + 1


def reps_for(delta: float, per_unit: int = 4) -> int:
    return per_unit * max(1, math.ceil(math.log2(1.0 / delta)))


def _levels(key, copies, reps, positions, cap):
    """Sampling level of each position under each (copy, rep): shape (C, R, len)."""
    pos = np.asarray(positions, dtype=np.uint64)
    keys = derive_keys(key, copies, reps)[..., None]
    return leading_zeros(hash_array(keys, pos[None, None, :]), cap).astype(np.int8)


class SampledBitTests(QueryFamily):
    """All tests of ``copies`` independent single-element samplers.

    For copy c and repetition t every position p gets a level z(p): it is
    kept at rate 1/2**z for z up to that level, so the samples are nested
    across rates.  Test ``(c, t, z, b, v)`` asks OR over the kept positions
    at rate 1/2**z whose bit b equals v.  Tests over an empty set are not
    issued.
    """

    def __init__(self, view, key: int, copies: int, reps: int):
        self.view = view
        self.kind = view.kind
        self.key = key
        self.copies, self.reps = copies, reps
        N = self.N = len(view)
        self.P = n_scales(N)
        self.B = max(1, ceil_log2(N))
        self.codes = np.arange(N, dtype=np.int64)
        self.lv = _levels(key, copies, reps, range(N), self.P - 1)
        self.planes = ((self.codes[:, None] >> np.arange(self.B)) & 1).astype(np.int8)
        self.layout = self._fired(self.lv, self.planes)
        self._count = int(self.layout.sum())

    def _fired(self, lv, planes):
        """Which tests contain at least one of the given positions."""
        C, R, n = lv.shape
        # per exact level: how many positions there are and how many have each bit set
        levels = np.arange(self.P, dtype=lv.dtype)[:, None]
        onehot = (lv[:, :, None, :] == levels).astype(np.float32)  # (C, R, P, n)
        cols = np.concatenate([planes, np.ones((n, 1), dtype=planes.dtype)], axis=1)
        counts = onehot @ cols.astype(np.float32)  # (C, R, P, B + 1)
        # reverse cumulative sums give counts over the positions kept at each rate
        counts = np.flip(np.cumsum(np.flip(counts, 2), axis=2), 2)
        ones, total = counts[..., :-1], counts[..., -1:]
        return np.stack([total - ones > 0.5, ones > 0.5], axis=-1)

    def __len__(self):
        return self._count

    def expand(self):
        out = []
        for c, t, z, b, v in zip(*np.nonzero(self.layout)):
            members = np.flatnonzero((self.lv[c, t] >= z) & (self.planes[:, b] == v))
            out.append(self.view.query(members.tolist()))
        return out

    def evaluate(self, instance):
        supp = self.view.true_support(instance)
        return self._fired(self.lv[:, :, supp], self.planes[supp])[self.layout]

    def full_answers(self, answers):
        full = np.zeros(self.layout.shape, dtype=bool)
        full[self.layout] = np.asarray(answers, dtype=bool)
        return full

    def decode(self, answers):
        """Per copy: the sampled position from the first clean sample, or -1."""
        full = self.full_answers(answers)  # (C, R, P, B, 2)
        both = (full[..., 0] & full[..., 1]).any(axis=-1)
        some = full.any(axis=(-1, -2))
        pos = (full[..., 1].astype(np.int64) << np.arange(self.B)).sum(axis=-1)
        ok = some & ~both & (pos < self.N)
        # reverify: the decoded position must itself be kept at that rate
        safe = np.where(ok, pos, 0)
        C, R, P = ok.shape
        lv = np.take_along_axis(self.lv, safe.reshape(C, R, P), axis=2)
        ok &= lv >= np.arange(P)[None, None, :]
        order = np.transpose(ok, (0, 2, 1)).reshape(C, P * R)
        posr = np.transpose(pos, (0, 2, 1)).reshape(C, P * R)
        first = order.argmax(axis=1)
        hit = order[np.arange(C), first]
        return np.where(hit, posr[np.arange(C), first], -1)


def rand_supp_samp_proc(view, delta: float = 0.5, seed: int = 0, copies: int = 1):
    """One round; per copy a uniform support position (or None on failure)."""
    if len(view) == 0:
        return [None] * copies
    fam = SampledBitTests(view, derive_key(seed, 0x5A3), copies, reps_for(delta))
    if len(fam) == 0:
        return [None] * copies
    (answers,) = yield [fam]
    return [None if p < 0 else int(p) for p in fam.decode(answers)]


def rand_supp_samp(oracle: Oracle, delta: float = 0.1, seed: int = 0):
    view = VectorView(oracle.n_dims)
    return oracle.run(rand_supp_samp_proc(view, delta, seed))[0]


class SampledEmptinessTests(QueryFamily):
    """Test ``(t, z)``: OR over positions kept at rate 1/2**z in repetition t."""

    def __init__(self, view, key: int, reps: int):
        self.view = view
        self.kind = view.kind
        self.reps = reps
        N = self.N = len(view)
        self.P = n_scales(N)
        self.lv = _levels(key, 1, reps, range(N), self.P - 1)[0]
        top = self.lv.max(axis=1) if N else np.full(reps, -1)
        self.layout = np.arange(self.P)[None, :] <= top[:, None]
        self._count = int(self.layout.sum())

    def __len__(self):
        return self._count

    def expand(self):
        return [
            self.view.query(np.flatnonzero(self.lv[t] >= z).tolist())
            for t, z in zip(*np.nonzero(self.layout))
        ]

    def evaluate(self, instance):
        supp = self.view.true_support(instance)
        top = self.lv[:, supp].max(axis=1) if len(supp) else np.full(self.reps, -1)
        full = np.arange(self.P)[None, :] <= top[:, None]
        return full[self.layout]

    def full_answers(self, answers):
        full = np.zeros(self.layout.shape, dtype=bool)
        full[self.layout] = np.asarray(answers, dtype=bool)
        return full


def majority_scale(full) -> int | None:
    """Largest z whose sample was non-empty in a strict majority of reps."""
    votes = full.sum(axis=0)
    good = np.flatnonzero(2 * votes > full.shape[0])
    return None if len(good) == 0 else int(good[-1])


def supp_est_proc(view, delta: float = 0.05, seed: int = 0, reps: int | None = None):
    """One round; an estimate within a factor 3 of |supp| (None if x = 0)."""
    if len(view) == 0:
        return None
    reps = reps or reps_for(delta)
    fam = SampledEmptinessTests(view, derive_key(seed, 0xE57), reps)
    (answers,) = yield [fam]
    full = fam.full_answers(answers)
    if not full[:, 0].any():
        return None
    z = majority_scale(full)
    return 1 if z is None else 2 ** z


def supp_est(oracle: Oracle, delta: float = 0.05, seed: int = 0) -> int:
    view = VectorView(oracle.n_dims)
    est = oracle.run(supp_est_proc(view, delta, seed))
    if est is None:
        raise ZeroVector()
    return est


def sampler_copies(M: int, N: int, factor: float = 2.0) -> int:
    return max(1, math.ceil(factor * M * math.log2(N + 1)))


def rand_supp_rec_proc(view, M: int, seed: int = 0, factor: float = 2.0, dense_fallback: bool = True):
    """One round; the support whp when it has at most M positions.

    Runs ``O(M log N)`` independent single-element samplers at delta = 1/2.
    When that would cost at least N queries, probing every position is
    cheaper and exact, and is used instead unless ``dense_fallback`` is off.
    """
    N = len(view)
    if N == 0 or M <= 0:
        return frozenset()
    copies = sampler_copies(M, N, factor)
    per_copy = reps_for(0.5) * n_scales(N) * 2 * max(1, ceil_log2(N))
    if dense_fallback and copies * per_copy >= N:
        answers = yield from ask(view.query([p]) for p in range(N))
        return frozenset(p for p, a in enumerate(answers) if a)
    got = yield from rand_supp_samp_proc(view, 0.5, seed, copies)
    return frozenset(p for p in got if p is not None)


def rand_supp_rec(oracle: Oracle, M: int, seed: int = 0, dense_fallback: bool = True) -> frozenset:
    view = VectorView(oracle.n_dims)
    return oracle.run(rand_supp_rec_proc(view, M, seed, dense_fallback=dense_fallback))


__all__ = [
    "ZeroVector",
    "MatrixConstructionFailed",
    "SupportResult",
    "TOO_LARGE",
    "Exact",
    "binary_search",
    "binary_search_proc",
    "DisjunctMatrix",
    "bit_matrix",
    "kautz_singleton",
    "random_disjunct",
    "disjunct_matrix",
    "is_d_disjunct",
    "decode",
    "bnd_supp_rec",
    "bnd_supp_rec_proc",
    "det_find_many",
    "det_find_many_proc",
    "find_many_target",
    "rand_supp_samp",
    "rand_supp_samp_proc",
    "supp_est",
    "supp_est_proc",
    "rand_supp_rec",
    "rand_supp_rec_proc",
    "SampledBitTests",
    "SampledEmptinessTests",
    "subview",
]
