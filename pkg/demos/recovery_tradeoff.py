"""Rounds against queries for single-element and bounded-support recovery.

    python demos/recovery_tradeoff.py
"""

from qgraph.oracle import HiddenVector, Oracle
from qgraph.recovery import binary_search, bnd_supp_rec

N = 4096
x = HiddenVector.indicator(N, [2718])

print(f"finding the one nonzero of a length-{N} vector with OR queries")
print(f"{'rounds':>6} {'per round':>10} {'total':>6}")
for r in range(1, 7):
    o = Oracle(x)
    assert binary_search(o, r) == 2718
    st = o.stats()
    print(f"{r:>6} {st.max_per_round:>10} {st.total:>6}")

# one non-adaptive round recovers any support of size <= d, and says so otherwise
for supp in ([5, 900], [5, 900, 3001], [1, 2, 3, 4]):
    o = Oracle(HiddenVector.indicator(N, supp))
    res = bnd_supp_rec(o, 3)
    print(f"support {supp}: {'exact ' + str(sorted(res.support)) if res.exact else 'too large'}"
          f" after {o.stats().total} queries in {o.stats().rounds_used} round")
