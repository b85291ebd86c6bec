"""Generators, verifiers and the experiment runner.

Success is always decided here, by comparing an algorithm's output with
the hidden instance; algorithms never grade themselves.  Every trial gets
a fresh instance, oracle and transcript, and its seed is derived from the
master seed, n and the trial index, so adding trials leaves earlier ones
unchanged.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ._hashing import derive_key
from ._intmath import ceil_log2, ceil_pow
from .adversary import (
    BudgetExceeded,
    ForestAdversary,
    SerAdversary,
    replay,
    two_clique_instance,
    two_clique_pair,
)
from .connectivity import (
    DisjointSetPartition,
    Failure,
    SpanningForest,
    det_graph_conn,
    rand_graph_conn_bis,
    rand_graph_conn_or,
    sample_round,
    sample_size,
)
from .cross_sketch import rand_graph_conn_cross
from .oracle import HiddenVector, Kind, MultiGraph, Oracle, PairView, or_query, parallel, read_graph
from .recovery import ZeroVector, binary_search, binary_search_proc, bnd_supp_rec, rand_supp_samp


class InvalidModelParams(ValueError):
    pass


class InvalidConfig(ValueError):
    pass


class DegenerateData(ValueError):
    pass


# --------------------------------------------------------------------------
# instances

_MODEL_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_model(model) -> tuple[str, list]:
    """``"er(0.05)"`` -> ``("er", [0.05])``; dicts ``{"name": ..., "args": [...]}`` also work."""
    if isinstance(model, dict):
        return model["name"], list(model.get("args", []))
    m = _MODEL_RE.match(str(model))
    if not m:
        raise InvalidModelParams(f"cannot parse model {model!r}")
    name, inner = m.group(1), m.group(2)
    args = []
    if inner and inner.strip():
        for tok in inner.split(","):
            tok = tok.strip()
            if name == "file":
                args.append(tok)
                continue
            try:
                args.append(int(tok))
            except ValueError:
                try:
                    args.append(float(tok))
                except ValueError:
                    args.append(tok)
    return name, args


def _pairs_with_prob(n, p, rng):
    u, v = np.triu_indices(n, 1)
    keep = rng.random(len(u)) < p
    return u[keep], v[keep]


def _connected_block(vs, p, rng):
    """ER(p) on ``vs`` plus a random spanning path, so the block is connected."""
    vs = list(vs)
    edges = set()
    order = [vs[i] for i in rng.permutation(len(vs))]
    for a, b in zip(order, order[1:]):
        edges.add((min(a, b), max(a, b)))
    for a, b in zip(*_pairs_with_prob(len(vs), p, rng)):
        x, y = vs[a], vs[b]
        edges.add((min(x, y), max(x, y)))
    return edges


def generate_graph(model, n: int, seed: int = 0) -> MultiGraph:
    """A graph from a named model; a deterministic function of (model, n, seed).

    Models: ``er(p)``, ``multigraph(p, max_mult)``, ``path``, ``cycle``,
    ``star``, ``clique``, ``planted_components(k[, p])`` or
    ``planted_components(s1, s2, ...)`` with sizes summing to n,
    ``two_clique(yes|no)`` and ``file(path)``.
    """
    name, args = parse_model(model)
    if name == "file":
        if len(args) != 1:
            raise InvalidModelParams("file(path) takes one path")
        return read_graph(args[0])
    if n < 1:
        raise InvalidModelParams("n must be positive")
    rng = np.random.default_rng(derive_key(seed, 0x6E7))
    if name == "er":
        (p,) = _need(args, 1, name)
        _prob(p)
        u, v = _pairs_with_prob(n, p, rng)
        return MultiGraph(n, list(zip(u.tolist(), v.tolist())))
    if name == "multigraph":
        p, top = _need(args, 2, name)
        _prob(p)
        if int(top) != top or top < 1:
            raise InvalidModelParams("max_mult must be a positive integer")
        u, v = _pairs_with_prob(n, p, rng)
        m = rng.integers(1, int(top) + 1, size=len(u))
        return MultiGraph(n, list(zip(u.tolist(), v.tolist(), m.tolist())))
    if name == "path":
        return MultiGraph(n, [(i, i + 1) for i in range(n - 1)])
    if name == "cycle":
        if n < 3:
            raise InvalidModelParams("a cycle needs n >= 3")
        return MultiGraph(n, [(i, (i + 1) % n) for i in range(n)])
    if name == "star":
        return MultiGraph(n, [(0, i) for i in range(1, n)])
    if name == "clique":
        return MultiGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
    if name == "planted_components":
        return _planted(n, args, rng)
    if name == "two_clique":
        (flag,) = _need(args, 1, name)
        planted = {"yes": True, "no": False, "1": True, "0": False, "true": True, "false": False}.get(str(flag).lower())
        if planted is None:
            raise InvalidModelParams("two_clique takes yes or no")
        if n < 4:
            raise InvalidModelParams("two_clique needs n >= 4")
        return two_clique_instance(n, seed, planted)
    raise InvalidModelParams(f"unknown model {name!r}")


def _need(args, k, name):
    if len(args) != k:
        raise InvalidModelParams(f"{name} takes {k} parameter(s), got {len(args)}")
    return args


def _prob(p):
    if not isinstance(p, (int, float)) or not 0 <= p <= 1:
        raise InvalidModelParams(f"probability out of range: {p!r}")


def _planted(n, args, rng):
    p = 0.3
    if len(args) >= 2 and all(isinstance(a, int) for a in args):
        sizes = list(args)
    else:
        k = int(args[0]) if args else 3
        if len(args) == 2:
            p = args[1]
        elif len(args) > 2:
            raise InvalidModelParams("planted_components(k[, p]) or planted_components(sizes...)")
        if k < 1 or k > n:
            raise InvalidModelParams("need 1 <= k <= n components")
        sizes = [n // k + (i < n % k) for i in range(k)]
    _prob(p)
    if sum(sizes) != n or min(sizes) < 1:
        raise InvalidModelParams(f"component sizes {sizes} must be positive and sum to {n}")
    perm = rng.permutation(n).tolist()
    edges, pos = set(), 0
    for s in sizes:
        edges |= _connected_block(perm[pos:pos + s], p, rng)
        pos += s
    return MultiGraph(n, sorted(edges))


def generate_vector(model, N: int, seed: int = 0) -> HiddenVector:
    """``singleton`` (one random index) or ``sparse(s)`` (s random indices)."""
    name, args = parse_model(model)
    rng = np.random.default_rng(derive_key(seed, 0x7EC))
    if name == "singleton":
        return HiddenVector.indicator(N, [int(rng.integers(N))])
    if name == "sparse":
        (s,) = _need(args, 1, name)
        if not 0 <= s <= N:
            raise InvalidModelParams("support size out of range")
        return HiddenVector.indicator(N, rng.choice(N, int(s), replace=False).tolist())
    raise InvalidModelParams(f"unknown vector model {name!r}")


# --------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class Verdict:
    ok: bool
    diagnosis: str | None = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def verify_forest(G: MultiGraph, f) -> Verdict:
    """Check that ``f`` uses real edges, is acyclic, and spans G's components."""
    if isinstance(f, Failure):
        return Verdict(False, "Failure", f.reason)
    if f.n != G.n_vertices:
        return Verdict(False, "NotSpanning", f"forest on {f.n} vertices, graph on {G.n_vertices}")
    dsu = DisjointSetPartition(G.n_vertices)
    for u, v in f.edges:
        if not G.has_edge(u, v):
            return Verdict(False, "NonEdge", f"({u}, {v}) is not an edge")
        if not dsu.union(u, v):
            return Verdict(False, "Cycle", f"({u}, {v}) closes a cycle")
    if dsu.labels() != G.components():
        return Verdict(False, "NotSpanning", "forest components differ from the graph's")
    return Verdict(True)


# --------------------------------------------------------------------------
# configuration


GRAPH_ALGOS = ("det_graph_conn", "rand_graph_conn_or", "rand_graph_conn_bis", "rand_graph_conn_cross")
VECTOR_ALGOS = ("binary_search", "bnd_supp_rec", "rand_supp_samp")
ADVERSARY_ALGOS = ("binary_search", "row_search")
MODES = ("run", "sparsity", "indistinguishability", "adversary")
ROUNDS = {"rand_graph_conn_or": 2, "rand_graph_conn_bis": 4, "rand_graph_conn_cross": 1}
RANDOMIZED = {"rand_graph_conn_or", "rand_graph_conn_bis", "rand_graph_conn_cross", "rand_supp_samp"}


@dataclass
class ExperimentConfig:
    algorithm: str
    n: list = field(default_factory=lambda: [64])
    r: int = 1
    c: int = 1
    seed: int = 0
    trials: int = 1
    model: str | None = None
    mode: str = "run"
    constants: dict = field(default_factory=dict)
    budget_fraction: float | None = None
    max_failure_rate: float | None = None

    def __post_init__(self):
        if isinstance(self.n, int):
            self.n = [self.n]
        self.n = [int(x) for x in self.n]
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}")
        known = GRAPH_ALGOS + VECTOR_ALGOS + ("row_search",)
        if self.mode == "run" and self.algorithm not in GRAPH_ALGOS + VECTOR_ALGOS:
            raise InvalidConfig(f"unknown algorithm {self.algorithm!r}")
        if self.mode == "adversary" and self.algorithm not in ADVERSARY_ALGOS:
            raise InvalidConfig(f"adversary mode runs {ADVERSARY_ALGOS}")
        if self.algorithm not in known:
            raise InvalidConfig(f"unknown algorithm {self.algorithm!r}")
        if not self.n or min(self.n) < 1:
            raise InvalidConfig("n must be positive")
        if self.r < 1 or self.trials < 1:
            raise InvalidConfig("r and trials must be positive")
        if self.algorithm == "det_graph_conn" and self.mode == "run" and self.r < 1:
            raise InvalidConfig("det_graph_conn needs r >= 1")
        allowed = {"k_sampler", "c1", "c2", "delta", "d", "sub", "queries"}
        extra = set(self.constants) - allowed
        if extra:
            raise InvalidConfig(f"unknown constants {sorted(extra)}")
        if self.budget_fraction is not None and not 0 < self.budget_fraction <= 1:
            raise InvalidConfig("budget_fraction must be in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise InvalidConfig(f"unknown config fields {sorted(extra)}")
        if "algorithm" not in d:
            raise InvalidConfig("config needs an algorithm")
        return cls(**d)

    def model_or_default(self) -> str:
        if self.model is not None:
            return self.model
        if self.mode == "sparsity":
            return "er(0.5)"
        return "singleton" if self.algorithm in VECTOR_ALGOS else "er(0.1)"

    @property
    def allowed_failure_rate(self) -> float:
        if self.max_failure_rate is not None:
            return self.max_failure_rate
        return 0.05 if self.algorithm in RANDOMIZED else 0.0


def trial_seed(master: int, n: int, i: int) -> int:
    return derive_key(master, n, i) & 0x7FFFFFFF


# --------------------------------------------------------------------------
# reports


CSV_COLUMNS = ["algo", "n", "r", "seed", "rounds", "total_queries", "max_round_queries", "success", "ms"]


@dataclass
class TrialRow:
    algo: str
    n: int
    r: int
    seed: int
    rounds: int
    total_queries: int
    max_round_queries: int
    success: bool
    ms: float
    per_round_counts: list = field(default_factory=list)
    error: str | None = None
    extra: dict = field(default_factory=dict)

    def csv_row(self):
        return [self.algo, self.n, self.r, self.seed, self.rounds, self.total_queries,
                self.max_round_queries, int(self.success), f"{self.ms:.3f}"]


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list = field(default_factory=list)

    def success_rate(self, n: int | None = None) -> float:
        rows = [x for x in self.rows if n is None or x.n == n]
        return sum(x.success for x in rows) / len(rows) if rows else float("nan")

    def aggregates(self) -> dict:
        out = {"success_rate": self.success_rate(), "by_n": {}}
        for n in sorted({x.n for x in self.rows}):
            rows = [x for x in self.rows if x.n == n]
            totals = [x.total_queries for x in rows]
            out["by_n"][n] = {
                "trials": len(rows),
                "success_rate": self.success_rate(n),
                "mean_total": float(np.mean(totals)),
                "max_total": int(max(totals)),
                "max_rounds": int(max(x.rounds for x in rows)),
            }
        if len(out["by_n"]) >= 3 and all(x.total_queries > 0 for x in self.rows):
            out["fit"] = asdict(fit_scaling(self.rows, "n", "total_queries"))
        return out

    def passed(self) -> bool:
        if not self.rows:
            return False
        return 1 - self.success_rate() <= self.config.allowed_failure_rate + 1e-12

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow(row.csv_row())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "config": asdict(self.config),
            "columns": CSV_COLUMNS,
            "rows": [asdict(x) for x in self.rows],
            "aggregates": self.aggregates(),
        }, indent=2, default=str)


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    residual: float


def fit_scaling(rows, x_field: str, y_field: str) -> Fit:
    """Least squares of log y on log x; rows are mappings or objects with those fields."""
    def get(row, name):
        return row[name] if isinstance(row, dict) else getattr(row, name)

    xs = np.array([float(get(r, x_field)) for r in rows])
    ys = np.array([float(get(r, y_field)) for r in rows])
    if len(set(xs.tolist())) < 3:
        raise DegenerateData("need at least 3 distinct x values")
    if (xs <= 0).any() or (ys <= 0).any():
        raise DegenerateData("log-log fit needs positive values")
    lx, ly = np.log(xs), np.log(ys)
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    return Fit(float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2))))


# --------------------------------------------------------------------------
# running


def _row(cfg, n, seed, oracle, success, t0, error=None, **extra):
    st = oracle.stats() if oracle is not None else None
    return TrialRow(
        algo=cfg.algorithm, n=n, r=cfg.r, seed=seed,
        rounds=st.rounds_used if st else 0,
        total_queries=st.total if st else 0,
        max_round_queries=st.max_per_round if st else 0,
        success=bool(success), ms=(time.perf_counter() - t0) * 1000,
        per_round_counts=list(st.per_round_counts) if st else [],
        error=error, extra=extra,
    )


def run_graph_trial(cfg: ExperimentConfig, n: int, seed: int) -> TrialRow:
    G = generate_graph(cfg.model_or_default(), n, seed)
    o = Oracle(G)
    k = cfg.constants
    t0 = time.perf_counter()
    try:
        if cfg.algorithm == "det_graph_conn":
            out = det_graph_conn(o, cfg.r)
        elif cfg.algorithm == "rand_graph_conn_or":
            out = rand_graph_conn_or(o, seed=seed, c1=k.get("c1", 1.0), c2=k.get("c2", 1.0))
        elif cfg.algorithm == "rand_graph_conn_bis":
            out = rand_graph_conn_bis(o, seed=seed, c1=k.get("c1", 1.0))
        else:
            out = rand_graph_conn_cross(o, seed=seed, k=k.get("k_sampler"), sub=k.get("sub", 24))
    except Exception as exc:  # recorded, not fatal
        return _row(cfg, n, seed, o, False, t0, error=f"{type(exc).__name__}: {exc}")
    verdict = verify_forest(G, out)
    ok = bool(verdict)
    rounds = o.stats().rounds_used
    if cfg.algorithm == "det_graph_conn":
        ok = ok and rounds <= 35 * cfg.r
    elif cfg.algorithm in ROUNDS:
        ok = ok and rounds == ROUNDS[cfg.algorithm]
    return _row(cfg, n, seed, o, ok, t0, error=verdict.diagnosis,
                kinds=sorted(x.value for x in o.transcript.kinds()))


def run_vector_trial(cfg: ExperimentConfig, N: int, seed: int) -> TrialRow:
    x = generate_vector(cfg.model_or_default(), N, seed)
    o = Oracle(x)
    supp = x.support()
    t0 = time.perf_counter()
    try:
        if cfg.algorithm == "binary_search":
            j = binary_search(o, cfg.r, validate_nonzero=not supp)
            ok = j in supp and o.stats().rounds_used <= cfg.r
        elif cfg.algorithm == "bnd_supp_rec":
            d = int(cfg.constants.get("d", 1))
            res = bnd_supp_rec(o, d)
            ok = res.support == supp if len(supp) <= d else (res.too_large or res.support == supp)
        else:
            j = rand_supp_samp(o, cfg.constants.get("delta", 0.1), seed=seed)
            ok = (j in supp) if supp else j is None
    except ZeroVector:
        ok = not supp
    except Exception as exc:
        return _row(cfg, N, seed, o, False, t0, error=f"{type(exc).__name__}: {exc}")
    return _row(cfg, N, seed, o, ok, t0)


def cross_edges(G: MultiGraph, labels) -> int:
    """Pairs of G (ignoring multiplicity) whose ends carry different labels."""
    u, v, _ = G.edge_array()
    lab = np.asarray(labels)
    return int((lab[u] != lab[v]).sum())


def run_sparsity_trial(cfg: ExperimentConfig, n: int, seed: int) -> TrialRow:
    """Components after one round of per-vertex edge sampling, and the edges between them."""
    G = generate_graph(cfg.model_or_default(), n, seed)
    o = Oracle(G)
    t0 = time.perf_counter()
    s = sample_size(n, cfg.constants.get("c1", 1.0))
    sampled = o.run(sample_round(n, s, seed, Kind.OR))
    dsu = DisjointSetPartition(n)
    for a, b in sampled:
        dsu.union(a, b)
    e = cross_edges(G, dsu.labels())
    ratio = e / (n * math.log2(n))
    return _row(cfg, n, seed, o, True, t0, e_cross=e, ratio=ratio, parts=dsu.n_parts(), s=s)


def indistinguishability_budget(n: int) -> int:
    lg = math.log2(n)
    return max(1, math.floor(n * n / (3000 * lg * lg)))


def random_or_queries(n: int, q: int, seed: int) -> list:
    """q random edge-slot sets; sizes uniform in 1..72 log^2 n, slots uniform."""
    rng = np.random.default_rng(derive_key(seed, 0x0E5))
    cap = max(1, math.ceil(72 * math.log2(n) ** 2))
    total = n * (n - 1) // 2
    u, v = np.triu_indices(n, 1)
    qs = []
    for _ in range(q):
        size = int(rng.integers(1, min(cap, total) + 1))
        ids = rng.choice(total, size, replace=False)
        qs.append(or_query(zip(u[ids].tolist(), v[ids].tolist())))
    return qs


def run_indistinguishability_trial(cfg: ExperimentConfig, n: int, seed: int) -> TrialRow:
    """Same fixed queries on a two-clique instance and its bridged sibling."""
    pair = two_clique_pair(n, seed)
    q = int(cfg.constants.get("queries", 0)) or indistinguishability_budget(n)
    qs = random_or_queries(n, q, seed)
    t0 = time.perf_counter()
    o_no, o_yes = Oracle(pair.sibling), Oracle(pair.graph)
    a_no, a_yes = o_no.commit(qs), o_yes.commit(qs)
    same = list(map(bool, a_no)) == list(map(bool, a_yes))
    return _row(cfg, n, seed, o_yes, same, t0, queries=q, bridge=list(pair.bridge))


def under_budget_blocks(N: int, r: int, fraction: float | None) -> int:
    """Blocks per round for binary search: queries per round = blocks - 1."""
    full = ceil_pow(N, 1, r) - 1
    q = full - 1 if fraction is None else max(1, math.floor(fraction * full))
    return q + 1


def run_adversary_trial(cfg: ExperimentConfig, n: int, seed: int) -> TrialRow:
    """An algorithm against a hostile oracle; success means the adversary's witness refutes it."""
    t0 = time.perf_counter()
    if cfg.algorithm == "binary_search":
        adv = SerAdversary(n, cfg.r)
        o = Oracle(adv)
        try:
            j = binary_search(o, cfg.r, blocks=under_budget_blocks(n, cfg.r, cfg.budget_fraction))
        except BudgetExceeded as exc:
            return _row(cfg, n, seed, o, False, t0, error=f"BudgetExceeded: {exc}", refused=True)
        x = adv.witness(j)
        bad = replay(o.transcript, x)
        return _row(cfg, n, seed, o, not bad and j not in x.support(), t0,
                    mismatches=len(bad), claimed=j)
    adv = ForestAdversary(n, cfg.r)
    o = Oracle(adv)
    frac = 0.5 if cfg.budget_fraction is None else cfg.budget_fraction
    per_vertex = max(1, math.floor(frac * adv.t / n))
    procs = [binary_search_proc(PairView([(u, n + i) for i in range(n)]), cfg.r, blocks=per_vertex + 1)
             for u in range(n)]
    try:
        found = o.run(parallel(procs))
    except BudgetExceeded as exc:
        return _row(cfg, n, seed, o, False, t0, error=f"BudgetExceeded: {exc}", refused=True)
    claims = {u: j for u, j in enumerate(found) if j is not None}
    G = adv.witness(claims)
    bad = replay(o.transcript, G)
    refuted = adv.refuted(G, claims)
    return _row(cfg, n, seed, o, not bad and bool(refuted), t0, mismatches=len(bad),
                refuted=len(refuted), alive=int(adv.alive().sum()))


def run_trial(cfg: ExperimentConfig, n: int, seed: int) -> TrialRow:
    if cfg.mode == "sparsity":
        return run_sparsity_trial(cfg, n, seed)
    if cfg.mode == "indistinguishability":
        return run_indistinguishability_trial(cfg, n, seed)
    if cfg.mode == "adversary":
        return run_adversary_trial(cfg, n, seed)
    if cfg.algorithm in GRAPH_ALGOS:
        return run_graph_trial(cfg, n, seed)
    return run_vector_trial(cfg, n, seed)


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentReport:
    report = ExperimentReport(cfg)
    for n in cfg.n:
        for i in range(cfg.trials):
            seed = trial_seed(cfg.seed, n, i)
            row = run_trial(cfg, n, seed)
            report.rows.append(row)
            if progress:
                progress(row)
    return report


__all__ = [
    "InvalidModelParams",
    "InvalidConfig",
    "DegenerateData",
    "ExperimentConfig",
    "ExperimentReport",
    "TrialRow",
    "Verdict",
    "Fit",
    "CSV_COLUMNS",
    "generate_graph",
    "generate_vector",
    "parse_model",
    "verify_forest",
    "fit_scaling",
    "run_experiment",
    "run_trial",
    "trial_seed",
    "cross_edges",
    "indistinguishability_budget",
    "random_or_queries",
    "under_budget_blocks",
]
