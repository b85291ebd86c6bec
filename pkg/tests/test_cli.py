import json

from qgraph.cli import main
from qgraph.oracle import read_graph


def test_gen_writes_graph(tmp_path, capsys):
    out = tmp_path / "g.txt"
    assert main(["gen", "--model", "path", "--n", "5", "--out", str(out)]) == 0
    assert set(read_graph(out).edges) == {(0, 1), (1, 2), (2, 3), (3, 4)}


def test_gen_bad_model(tmp_path, capsys):
    assert main(["gen", "--model", "er(3)", "--n", "5", "--out", str(tmp_path / "g")]) == 2
    assert "probability" in capsys.readouterr().err


def test_run_from_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"algorithm": "det_graph_conn", "n": [16, 32], "r": 2, "trials": 2,
                               "model": "er(0.2)"}))
    out, js = tmp_path / "r.csv", tmp_path / "r.json"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--json", str(js)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "algo,n,r,seed,rounds,total_queries,max_round_queries,success,ms"
    assert len(lines) == 5
    assert len(json.loads(js.read_text())["rows"]) == 4


def test_run_rejects_unknown_field(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"algorithm": "det_graph_conn", "speed": 3}))
    assert main(["run", "--config", str(cfg)]) == 2


def test_adv_under_and_full_budget(capsys):
    assert main(["adv", "--algo", "binary_search", "--n", "16,64", "--r", "2"]) == 0
    assert "refutation rate 1.000" in capsys.readouterr().out
    assert main(["adv", "--n", "64", "--r", "2", "--budget-fraction", "1"]) == 1
    assert "BudgetExceeded" in capsys.readouterr().out


def test_bench_prints_fit(capsys):
    assert main(["bench", "--algo", "det_graph_conn", "--n-list", "16,32,64", "--r", "1",
                 "--trials", "1", "--model", "er(0.3)"]) == 0
    out = capsys.readouterr().out
    assert "log-log slope" in out and "success" in out
