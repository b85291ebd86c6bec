import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgraph.connectivity import DisjointSetPartition, Failure
from qgraph.cross_sketch import (
    BOT,
    EMPTY_BOUNDARY,
    Edge,
    PairSamples,
    PartitionSampler,
    SamplerConsumed,
    SamplerTests,
    build_sampler,
    default_k,
    n_levels,
    rand_graph_conn_cross,
    sampler_query,
)
from qgraph.oracle import Kind, MultiGraph, Oracle, eval_cross


def er(n, p, seed):
    rng = random.Random(seed)
    return MultiGraph(n, [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p])


def random_labels(n, parts, rng):
    lab = [rng.randrange(parts) for _ in range(n)]
    first = {}
    for v, x in enumerate(lab):
        first.setdefault(x, v)
    return [first[x] for x in lab]


def boundary_in_sample(G, samples, S, z, i):
    """Boundary edges of S whose pair lies in the level-z sample of repetition i."""
    out = []
    for a, b, m in zip(*G.edge_array()):
        a, b = int(a), int(b)
        if (a in S) != (b in S) and samples.contains(z, i, a, b):
            out.append((a, b, int(m)))
    return out


def test_levels_cover_all_pairs():
    assert n_levels(2) == 1
    assert n_levels(64) == 12  # C(64, 2) = 2016 < 2**11
    assert default_k(64) == 100


def test_single_edge_tables():
    G = MultiGraph(4, [(1, 2)])
    sk = build_sampler(Oracle(G), seed=3, k=6, sub=5)
    whole = sk.tables[:, :, sk.sub, :]
    # level 0 keeps every pair
    assert (whole[:, :, 0] == np.array([0, 1, -1, 0])[:, None]).all()
    assert set(np.unique(whole[1])) <= {0, 1}


def test_double_edge_tables():
    G = MultiGraph(3, [(1, 2, 2)])
    sk = build_sampler(Oracle(G), seed=0, k=4, sub=3)
    assert (sk.tables[1, :, 3, 0] == 2).all() and (sk.tables[2, :, 3, 0] == -2).all()


def test_tables_sum_to_zero():
    for s in range(50):
        G = er(12, 0.3, s)
        sk = build_sampler(Oracle(G), seed=s, k=5, sub=6)
        assert not sk.tables.sum(axis=0).any()


def test_internal_cancellation():
    rng = random.Random(0)
    for s in range(10):
        G = er(16, 0.35, s)
        sk = build_sampler(Oracle(G), seed=s, k=4, sub=4)
        S = set(rng.sample(range(16), 6))
        total = sk.tables[sorted(S)].sum(axis=0)
        for i in range(sk.k):
            for z in range(sk.L):
                want = sum(m if a in S else -m for a, b, m in boundary_in_sample(G, sk.samples, S, z, i))
                assert total[i, sk.sub, z] == want


def test_family_matches_expanded_queries():
    G = MultiGraph(7, [(0, 3), (1, 2, 2), (2, 5), (4, 6), (3, 5)])
    tests = SamplerTests(PairSamples(7, 5, 4, 3))
    qs = tests.expand()
    assert len(qs) == len(tests)
    assert list(tests.evaluate(G)) == [eval_cross(G, *q.sides()) for q in qs]


def test_sub_samples_are_nested_in_levels():
    ps = PairSamples(20, 1, 3, 8)
    for u, v in [(0, 1), (3, 17), (5, 9)]:
        for z in range(1, ps.L):
            assert ps.contains(z, 2, u, v) <= ps.contains(z - 1, 2, u, v)
            for j in range(8):
                assert ps.contains(z, 2, u, v, j) <= ps.contains(z, 2, u, v)


def test_single_edge_both_parts():
    G = MultiGraph(3, [(1, 2)])
    sk = build_sampler(Oracle(G), seed=1)
    out = sampler_query(sk, [0, 1, 2])
    assert out[1] == Edge(1, 2) and out[2] == Edge(1, 2)
    assert out[0] is EMPTY_BOUNDARY


def test_isolated_part_is_empty():
    G = MultiGraph(5, [(0, 1), (1, 2)])
    sk = build_sampler(Oracle(G), seed=2)
    d = DisjointSetPartition(5)
    d.union(0, 1)
    d.union(1, 2)
    out = sk.query(d)
    assert out[0] is EMPTY_BOUNDARY and out[3] is EMPTY_BOUNDARY and out[4] is EMPTY_BOUNDARY


def test_second_query_fails():
    sk = build_sampler(Oracle(MultiGraph(3, [(0, 1)])), seed=0)
    sk.query([0, 1, 2])
    with pytest.raises(SamplerConsumed):
        sk.query([0, 1, 2])


def test_returned_edges_are_real_and_cross():
    rng = random.Random(7)
    for s in range(10):
        G = er(40, 0.1, s)
        sk = build_sampler(Oracle(G), seed=s)
        labels = random_labels(40, 6, rng)
        for name, res in sk.query(labels).items():
            if isinstance(res, Edge):
                assert G.has_edge(res.u, res.v)
                assert (labels[res.u] == name) != (labels[res.v] == name)


def test_edge_test_soundness():
    rng = random.Random(1)
    checked = 0
    for s in range(15):
        G = er(30, 0.15, s)
        sk = build_sampler(Oracle(G), seed=100 + s)
        labels = random_labels(30, 5, rng)
        trace = {}
        out = sk.query(labels, trace=trace)
        for name, (z, i) in trace.items():
            S = {v for v, x in enumerate(labels) if x == name}
            bd = boundary_in_sample(G, sk.samples, S, z, i)
            if len(bd) == 1:
                a, b, _ = bd[0]
                assert out[name] == Edge(a, b)
                checked += 1
    assert checked > 30


def test_level_test_isolates_one_edge():
    rng = random.Random(2)
    bad = total = 0
    for s in range(30):
        G = er(64, 0.1, s)
        sk = build_sampler(Oracle(G), seed=s)
        labels = random_labels(64, 8, rng)
        trace = {}
        sk.query(labels, trace=trace)
        for name, (z, i) in trace.items():
            S = {v for v, x in enumerate(labels) if x == name}
            bad += len(boundary_in_sample(G, sk.samples, S, z, i)) != 1
            total += 1
    assert total >= 200 and bad <= 0.01 * total


def test_serialization_round_trip():
    G = er(10, 0.4, 3)
    sk = build_sampler(Oracle(G), seed=9, k=5, sub=4)
    for back in (PartitionSampler.loads(sk.dumps()), PartitionSampler.from_json(sk.to_json())):
        assert (back.tables == sk.tables).all()
        assert (back.n, back.seed, back.k, back.sub, back.consumed) == (10, 9, 5, 4, False)
    labels = list(range(10))
    a = PartitionSampler.from_json(sk.to_json()).query(labels)
    assert a == sk.query(labels)
    # the consumed flag travels with the blob
    with pytest.raises(SamplerConsumed):
        PartitionSampler.loads(sk.dumps()).query(labels)


def test_empty_graph_one_round():
    o = Oracle(MultiGraph(6))
    F = rand_graph_conn_cross(o, seed=0)
    assert F.edges == [] and F.n_components() == 6
    assert o.stats().rounds_used == 1


def test_cycle_spanning_tree():
    n = 8
    G = MultiGraph(n, [(i, (i + 1) % n) for i in range(n)])
    ok = 0
    for s in range(100):
        o = Oracle(G)
        F = rand_graph_conn_cross(o, seed=s)
        assert o.stats().rounds_used == 1
        ok += not isinstance(F, Failure) and len(F.edges) == 7 and F.components() == G.components()
    assert ok >= 95


def test_two_components():
    G = MultiGraph(20, [(i, i + 1) for i in range(9)] + [(i, i + 1) for i in range(10, 19)] + [(0, 9), (12, 17)])
    for s in range(10):
        o = Oracle(G)
        F = rand_graph_conn_cross(o, seed=s)
        assert not isinstance(F, Failure)
        assert F.n_components() == 2 and F.components() == G.components()
        assert all(G.has_edge(u, v) for u, v in F.edges)
        assert o.transcript.kinds() == {Kind.CROSS}
        assert o.stats().rounds_used == 1


def test_few_samplers_reports_failure():
    G = MultiGraph(16, [(i, i + 1) for i in range(15)])
    F = rand_graph_conn_cross(Oracle(G), seed=0, samplers=1)
    assert isinstance(F, Failure)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 24), st.floats(0, 0.5), st.integers(0, 10 ** 6))
def test_forest_property(n, p, seed):
    G = er(n, p, seed)
    o = Oracle(G)
    F = rand_graph_conn_cross(o, seed=seed)
    assert o.stats().rounds_used == 1
    if not isinstance(F, Failure):
        assert F.components() == G.components()
        assert all(G.has_edge(u, v) for u, v in F.edges)


def test_compiled_split_matches_reference():
    s = PairSamples(40, seed=3, k=7, sub=24)
    u, v = np.triu_indices(40, 1)
    lv, bits = SamplerTests(s)._pair_data(u, v)
    pid = (u * 40 + v).astype(np.uint64)
    reps = np.arange(7)[:, None]
    assert np.array_equal(lv, s.levels(reps, pid[None, :]))
    assert np.array_equal(bits, s.bits(reps, pid[None, :]) | np.uint64(1 << 24))
