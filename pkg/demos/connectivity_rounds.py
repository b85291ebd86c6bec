"""Spanning forests of a hidden graph under the four query types.

    python demos/connectivity_rounds.py
"""

from qgraph.connectivity import det_graph_conn, rand_graph_conn_bis, rand_graph_conn_or
from qgraph.cross_sketch import rand_graph_conn_cross
from qgraph.harness import generate_graph, verify_forest
from qgraph.oracle import Oracle

n = 128
G = generate_graph("planted_components(3)", n, seed=1)
print(f"hidden graph: {n} vertices, {G.n_edges()} edges, {len(set(G.components()))} components\n")

runs = [(f"deterministic BIS, r={r}", lambda o, r=r: det_graph_conn(o, r)) for r in (1, 2, 3)]
runs += [
    ("randomized OR, 2 rounds", lambda o: rand_graph_conn_or(o, seed=1)),
    ("randomized BIS, 4 rounds", lambda o: rand_graph_conn_bis(o, seed=1)),
    ("Cross sketch, 1 round", lambda o: rand_graph_conn_cross(o, seed=1)),
]
print(f"{'algorithm':<26} {'ok':>3} {'rounds':>6} {'queries':>8}")
for name, algo in runs:
    o = Oracle(G)
    F = algo(o)
    st = o.stats()
    print(f"{name:<26} {'yes' if verify_forest(G, F) else 'no':>3} {st.rounds_used:>6} {st.total:>8}")
