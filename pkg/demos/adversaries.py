"""Two hostile oracles that refute algorithms running below their budget.

    python demos/adversaries.py
"""

from qgraph._intmath import ceil_pow
from qgraph.adversary import BudgetExceeded, ForestAdversary, SerAdversary, replay
from qgraph.oracle import Oracle, PairView, parallel
from qgraph.recovery import binary_search, binary_search_proc

N, r = 256, 2
adv = SerAdversary(N, r)
o = Oracle(adv)
j = binary_search(o, r, blocks=ceil_pow(N, 1, r) - 1)
x = adv.witness(j)
print(f"binary search with {o.stats().max_per_round} queries per round claims index {j}")
print(f"witness support {sorted(x.support())[:6]}..., replay mismatches: {len(replay(o.transcript, x))}")

try:
    binary_search(Oracle(SerAdversary(N, r)), r)
except BudgetExceeded as exc:
    print(f"with the full {ceil_pow(N, 1, r) - 1} queries per round the adversary refuses: {exc}")

# every vertex searches its own row of a bipartite graph, all in parallel
n = 256
adv = ForestAdversary(n, 1)
o = Oracle(adv)
procs = [binary_search_proc(PairView([(u, n + i) for i in range(n)]), 1, blocks=2) for u in range(n)]
claims = dict(enumerate(o.run(parallel(procs))))
G = adv.witness(claims)
print(f"\nrow search: {o.stats().total} OR queries against a budget of {adv.t}")
print(f"alive vertices {int(adv.alive().sum())}/{n}, witness consistent: {not replay(o.transcript, G)}, "
      f"vertices whose claimed edge is absent: {adv.refuted(G, claims)}")
