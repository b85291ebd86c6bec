import math
import random

import numpy as np
import pytest

from qgraph._intmath import ceil_pow
from qgraph.adversary import (
    BudgetExceeded,
    ForestAdversary,
    GuaranteeViolated,
    NoAliveClaim,
    SerAdversary,
    forest_budget,
    greedy_cover,
    replay,
    two_clique_instance,
    two_clique_pair,
    two_clique_split,
)
from qgraph.oracle import Oracle, PairView, bis_query, or_query, parallel, QueryError
from qgraph.recovery import binary_search, binary_search_proc


def test_small_query_is_zeroed():
    adv = SerAdversary(16, 2)
    assert adv.respond([range(4)]) == [False]
    assert adv.active == set(range(4, 16))
    assert adv.zeros == set(range(4))


def test_large_query_answers_one():
    adv = SerAdversary(16, 2)
    assert adv.respond([range(8)]) == [True]
    assert len(adv.active) == 16


def test_budget_is_strict():
    adv = SerAdversary(16, 2)
    with pytest.raises(BudgetExceeded):
        adv.respond([[0], [1], [2]])


def test_round_limit():
    adv = SerAdversary(16, 1)
    adv.respond([[0]])
    with pytest.raises(BudgetExceeded):
        adv.respond([[1]])


def test_zeroing_cascades():
    # after [0..3] is zeroed, [0..5] has only 2 active left and becomes small too
    adv = SerAdversary(16, 2)
    assert adv.respond([range(6), range(4)]) == [False, False]
    assert adv.zeros == set(range(6))


def test_witness_examples():
    adv = SerAdversary(16, 2)
    adv.active = {5, 9}
    adv.zeros = set(range(16)) - {5, 9}
    assert adv.witness(5).support() == {9}
    x = adv.witness(2)
    assert x.support() == {5, 9} and x.value(2) == 0


@pytest.mark.parametrize("N", [16, 64, 256])
@pytest.mark.parametrize("r", [1, 2])
def test_under_budget_search_is_fooled(N, r):
    adv = SerAdversary(N, r)
    o = Oracle(adv)
    j = binary_search(o, r, blocks=ceil_pow(N, 1, r) - 1)
    assert o.stats().max_per_round <= ceil_pow(N, 1, r) - 2
    x = adv.witness(j)
    assert replay(o.transcript, x) == []
    assert j not in x.support()


@pytest.mark.parametrize("N,r", [(16, 2), (64, 2), (256, 1)])
def test_full_budget_search_is_refused(N, r):
    with pytest.raises(BudgetExceeded):
        binary_search(Oracle(SerAdversary(N, r)), r)


def test_non_or_queries_rejected():
    adv = ForestAdversary(8, 1, budget=4)
    with pytest.raises(QueryError):
        adv.answer_batch([bis_query({0}, {9})])


def test_random_sequences_keep_invariant():
    rng = random.Random(0)
    for trial in range(100):
        N, r = rng.choice([(16, 2), (64, 2), (64, 3), (256, 2), (100, 1)])
        adv = SerAdversary(N, r)
        for _ in range(r):
            size = rng.randrange(adv.budget + 1)
            qs = [rng.sample(range(N), rng.randrange(1, N + 1)) for _ in range(size)]
            adv.respond(qs)  # checks the invariant after the round
        j = rng.randrange(N)
        x = adv.witness(j)
        for q in adv.log:
            assert bool(q.cells & x.support()) == q.answer
        assert x.value(j) == 0


def test_forest_budget_and_threshold():
    assert forest_budget(256, 1) == math.floor(256 ** 2 / (32 * math.log(256)))
    adv = ForestAdversary(16, 1)
    # 8 ln 16 = 22.18..., so touching all 16 vertices is still narrow
    assert adv.broad_threshold == pytest.approx(22.18, abs=0.01)
    assert not adv.is_broad(16)
    assert ForestAdversary(256, 1).is_broad(45) and not ForestAdversary(256, 1).is_broad(44)


def test_forest_narrow_small_row_is_zeroed():
    n = 16
    adv = ForestAdversary(n, 2, budget=4)
    # 4 <= 16 ** (1 - 1/2)
    q = or_query([(3, n + i) for i in range(4)])
    assert adv.answer_batch([q]) == [False]
    assert not adv.active[3, :4].any() and adv.active[3, 4:].all()


def test_forest_broad_query_kills_cover():
    n = 256
    adv = ForestAdversary(n, 1)
    q = or_query([(u, n + 0) for u in range(100)])
    assert adv.answer_batch([q]) == [True]
    assert [k[1:] for k in adv.kills] == [("broad", 0)]
    assert adv.ones[0, 0]


def test_same_side_pairs_are_never_edges():
    n = 16
    adv = ForestAdversary(n, 1, budget=2)
    assert adv.answer_batch([or_query([(0, 1), (n, n + 1)])]) == [False]


def test_forest_row_search_is_fooled():
    n, r = 256, 1
    adv = ForestAdversary(n, r)
    o = Oracle(adv)
    procs = [binary_search_proc(PairView([(u, n + i) for i in range(n)]), r, blocks=2) for u in range(n)]
    claims = dict(enumerate(o.run(parallel(procs))))
    assert o.stats().max_per_round <= adv.t
    G = adv.witness(claims)
    assert replay(o.transcript, G) == []
    assert adv.refuted(G, claims)
    assert adv.alive().sum() >= n / 2


def test_witness_construction():
    n = 8
    adv = ForestAdversary(n, 1, budget=4)
    adv.active[:] = False
    adv.active[2, [1, 5]] = True
    G = adv.witness({2: 5})
    assert not G.has_edge(2, n + 5) and G.has_edge(2, n + 1)


def test_dead_claims_only():
    n = 8
    adv = ForestAdversary(n, 1, budget=4)
    adv.active[3] = False
    adv.ones[3, 0] = True
    with pytest.raises(NoAliveClaim):
        adv.witness({3: 0})


def test_forest_budget_enforced():
    adv = ForestAdversary(16, 1)
    qs = [or_query([(0, 16 + i)]) for i in range(adv.t + 1)]
    with pytest.raises(BudgetExceeded):
        adv.answer_batch(qs)


def test_tiny_n_guarantee_can_fail():
    # with an inflated budget, many heavily touched vertices must be killed
    n = 16
    adv = ForestAdversary(n, 1, budget=300)
    qs = [or_query([(u, n + i) for i in range(8)]) for u in range(n) for _ in range(16)]
    with pytest.raises(GuaranteeViolated):
        adv.answer_batch(qs)


def random_forest_batch(adv, rng):
    """Random queries as coordinate arrays, from one-row probes to broad ones."""
    n = adv.n
    batch = []
    for _ in range(rng.integers(adv.t + 1)):
        rows = rng.choice(n, rng.choice([1, 2, 5, 60, 120]), replace=False)
        width = rng.choice([1, 3, n // 4])
        cols = np.argsort(rng.random((len(rows), n)), axis=1)[:, :width]
        batch.append((np.repeat(rows, width), cols.ravel()))
    return batch


def test_forest_random_sequences_keep_invariants():
    rng = np.random.default_rng(3)
    for trial in range(100):
        n, r = [(256, 1), (256, 2), (128, 1)][trial % 3]
        adv = ForestAdversary(n, r)
        for _ in range(r):
            adv.respond(random_forest_batch(adv, rng))  # asserts both invariants
        alive = np.flatnonzero(adv.active.any(axis=1))
        claims = {int(u): int(rng.integers(n)) for u in alive[:5]}
        G = adv.witness(claims)
        u, v, _ = G.edge_array()
        x = np.zeros((n, n), dtype=bool)
        x[u, v - n] = True
        for _, us, js, a in adv.log:
            assert bool(x[us, js].any()) == a


def test_greedy_cover():
    assert greedy_cover([{1, 2}, {2, 3}, {4}]) == [2, 4]
    assert greedy_cover([]) == []
    with pytest.raises(ValueError):
        greedy_cover([set()])


def test_two_clique_components():
    for s in range(5):
        no = two_clique_instance(40, s, planted=False)
        yes = two_clique_instance(40, s, planted=True)
        assert len(set(no.components())) == 2
        assert len(set(yes.components())) == 1
        assert yes.n_edges() == no.n_edges() + 1


def test_two_clique_sides_are_cliques():
    p = two_clique_pair(12, 4)
    assert sorted(p.left + p.right) == list(range(12))
    u, v = p.bridge
    assert (u in p.left) != (v in p.left)
    for a in p.left:
        for b in p.left:
            if a < b:
                assert p.sibling.has_edge(a, b)


def test_two_clique_balance():
    n = 1000
    ok = 0
    for s in range(100):
        left, right = two_clique_split(n, s)
        ok += min(len(left), len(right)) >= n / 3
    assert ok >= 99
