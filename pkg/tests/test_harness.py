import csv
import io
import json

import pytest

from qgraph.connectivity import Failure, SpanningForest
from qgraph.harness import (
    CSV_COLUMNS,
    DegenerateData,
    ExperimentConfig,
    InvalidConfig,
    InvalidModelParams,
    cross_edges,
    fit_scaling,
    generate_graph,
    generate_vector,
    parse_model,
    run_experiment,
    trial_seed,
    verify_forest,
)
from qgraph.oracle import MultiGraph, Oracle, write_graph
from qgraph.recovery import binary_search


def test_parse_model():
    assert parse_model("er(0.05)") == ("er", [0.05])
    assert parse_model("multigraph(1, 3)") == ("multigraph", [1, 3])
    assert parse_model("path") == ("path", [])
    assert parse_model({"name": "star"}) == ("star", [])
    with pytest.raises(InvalidModelParams):
        parse_model("er(0.1")


def test_path_model():
    assert set(generate_graph("path", 4).edges) == {(0, 1), (1, 2), (2, 3)}


def test_empty_er():
    assert generate_graph("er(0)", 10, seed=3).edges == {}


def test_multigraph_model():
    G = generate_graph("multigraph(1, 3)", 3, seed=1)
    assert set(G.edges) == {(0, 1), (0, 2), (1, 2)}
    assert all(1 <= m <= 3 for m in G.edges.values())


def test_models_are_deterministic():
    for model in ["er(0.2)", "multigraph(0.3, 4)", "planted_components(3)", "two_clique(yes)"]:
        assert generate_graph(model, 30, seed=5) == generate_graph(model, 30, seed=5)
    assert generate_graph("er(0.5)", 30, seed=1) != generate_graph("er(0.5)", 30, seed=2)


def test_simple_models():
    assert len(generate_graph("cycle", 6).edges) == 6
    assert len(generate_graph("star", 6).edges) == 5
    assert len(generate_graph("clique", 6).edges) == 15


def test_planted_components():
    G = generate_graph("planted_components(3)", 30, seed=2)
    assert len(set(G.components())) == 3
    G = generate_graph("planted_components(5, 10, 15)", 30, seed=2)
    assert sorted(G.components().count(c) for c in set(G.components())) == [5, 10, 15]


def test_two_clique_model():
    assert len(set(generate_graph("two_clique(no)", 20, 1).components())) == 2
    assert len(set(generate_graph("two_clique(yes)", 20, 1).components())) == 1


def test_file_model(tmp_path):
    G = MultiGraph(4, [(0, 1, 2), (2, 3)])
    path = tmp_path / "g.txt"
    write_graph(G, path)
    assert generate_graph(f"file({path})", 0) == G


@pytest.mark.parametrize("model", ["er(2)", "er", "cycle_x", "multigraph(0.5, 0)",
                                   "planted_components(3, 4)", "two_clique(maybe)"])
def test_bad_models(model):
    with pytest.raises(InvalidModelParams):
        generate_graph(model, 10)


def test_vector_models():
    assert len(generate_vector("singleton", 16, 1).support()) == 1
    assert len(generate_vector("sparse(5)", 16, 1).support()) == 5


def test_verify_path_forest():
    G = generate_graph("path", 5)
    assert verify_forest(G, SpanningForest(5, sorted(G.edges)))


def test_verify_non_edge():
    G = generate_graph("path", 4)
    v = verify_forest(G, SpanningForest(4, [(0, 1), (1, 2), (0, 3)]))
    assert not v and v.diagnosis == "NonEdge"


def test_verify_not_spanning():
    G = generate_graph("path", 4)
    v = verify_forest(G, SpanningForest(4, [(0, 1), (2, 3)]))
    assert not v and v.diagnosis == "NotSpanning"


def test_verify_cycle_and_failure():
    G = generate_graph("clique", 3)
    v = verify_forest(G, SpanningForest(3, [(0, 1), (1, 2), (0, 2)]))
    assert v.diagnosis == "Cycle"
    assert verify_forest(G, Failure("gave up")).diagnosis == "Failure"


def test_fit_exact_power():
    rows = [{"n": x, "q": x ** 2} for x in (2, 4, 8, 16)]
    fit = fit_scaling(rows, "n", "q")
    assert fit.slope == pytest.approx(2.0, abs=1e-9) and fit.residual < 1e-9


def test_fit_constant():
    rows = [{"n": x, "q": 7} for x in (2, 4, 8)]
    assert fit_scaling(rows, "n", "q").slope == pytest.approx(0.0, abs=1e-12)


def test_fit_degenerate():
    with pytest.raises(DegenerateData):
        fit_scaling([{"n": 2, "q": 1}, {"n": 4, "q": 2}], "n", "q")


def test_binary_search_per_round_slope():
    rows = []
    for N in (16, 64, 256, 1024):
        o = Oracle(generate_vector("singleton", N, 0))
        binary_search(o, 2)
        rows.append({"N": N, "m": o.stats().max_per_round})
    assert fit_scaling(rows, "N", "m").slope == pytest.approx(0.5, abs=0.1)


def test_config_validation():
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict({"algorithm": "nope"})
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict({"algorithm": "det_graph_conn", "colour": 1})
    with pytest.raises(InvalidConfig):
        ExperimentConfig(algorithm="det_graph_conn", constants={"zeta": 1})
    with pytest.raises(InvalidConfig):
        ExperimentConfig(algorithm="det_graph_conn", mode="adversary")
    assert ExperimentConfig(algorithm="det_graph_conn", n=32).n == [32]


def test_trial_seeds_are_stable():
    a = run_experiment(ExperimentConfig(algorithm="det_graph_conn", n=[20], trials=2, seed=4))
    b = run_experiment(ExperimentConfig(algorithm="det_graph_conn", n=[20], trials=4, seed=4))
    assert [x.seed for x in a.rows] == [x.seed for x in b.rows[:2]]
    assert [x.total_queries for x in a.rows] == [x.total_queries for x in b.rows[:2]]
    assert a.rows[0].seed == trial_seed(4, 20, 0)


def test_det_conn_scaling():
    cfg = ExperimentConfig(algorithm="det_graph_conn", n=[32, 64, 128, 256], r=2, trials=2,
                           model="er(0.1)")
    rep = run_experiment(cfg)
    assert rep.success_rate() == 1.0
    assert rep.aggregates()["fit"]["slope"] == pytest.approx(1.5, abs=0.15)


def test_report_counts_match_transcripts():
    rep = run_experiment(ExperimentConfig(algorithm="rand_graph_conn_bis", n=[32], trials=3))
    for row in rep.rows:
        assert sum(row.per_round_counts) == row.total_queries
        assert max(row.per_round_counts) == row.max_round_queries
        assert row.rounds == 4 == len(row.per_round_counts)


def test_report_formats():
    rep = run_experiment(ExperimentConfig(algorithm="det_graph_conn", n=[16, 24], trials=2))
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == CSV_COLUMNS and len(rows) == 5
    data = json.loads(rep.to_json())
    assert data["columns"] == CSV_COLUMNS and len(data["rows"]) == 4
    assert rep.passed()


def test_reports_are_reproducible():
    cfg = dict(algorithm="rand_graph_conn_or", n=[32], trials=2, seed=9)
    a = run_experiment(ExperimentConfig(**cfg))
    b = run_experiment(ExperimentConfig(**cfg))
    strip = lambda rep: [(x.seed, x.per_round_counts, x.success) for x in rep.rows]
    assert strip(a) == strip(b)


def test_vector_algorithms():
    for algo, model in [("binary_search", "singleton"), ("bnd_supp_rec", "sparse(2)"),
                        ("rand_supp_samp", "sparse(3)")]:
        rep = run_experiment(ExperimentConfig(algorithm=algo, n=[64], r=2, trials=5, model=model,
                                              constants={"d": 2}))
        assert rep.success_rate() >= 0.8, algo


def test_errors_are_recorded():
    rep = run_experiment(ExperimentConfig(algorithm="rand_graph_conn_cross", n=[16], trials=1,
                                          constants={"sub": 70}))
    assert not rep.rows[0].success and "ValueError" in rep.rows[0].error


def test_adversary_mode():
    rep = run_experiment(ExperimentConfig(algorithm="binary_search", n=[16, 64], r=2, mode="adversary"))
    assert rep.success_rate() == 1.0
    full = run_experiment(ExperimentConfig(algorithm="binary_search", n=[64], r=2, mode="adversary",
                                           budget_fraction=1.0))
    assert not full.rows[0].success and full.rows[0].extra["refused"]


def test_sparsity_mode():
    rep = run_experiment(ExperimentConfig(algorithm="rand_graph_conn_or", n=[64], mode="sparsity"))
    row = rep.rows[0]
    assert row.rounds == 1 and row.extra["e_cross"] >= 0 and "ratio" in row.extra


def test_cross_edges():
    G = MultiGraph(4, [(0, 1), (1, 2, 3), (2, 3)])
    assert cross_edges(G, [0, 0, 2, 2]) == 1


def test_indistinguishability_mode():
    rep = run_experiment(ExperimentConfig(algorithm="rand_graph_conn_or", n=[64], trials=10,
                                          mode="indistinguishability"))
    assert all(r.rounds == 1 for r in rep.rows)
    assert rep.success_rate() >= 0.8
