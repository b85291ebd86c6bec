"""Command line entry point: ``qgraph gen|run|adv|bench``."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (
    DegenerateData,
    ExperimentConfig,
    InvalidConfig,
    InvalidModelParams,
    fit_scaling,
    generate_graph,
    run_experiment,
)
from .oracle import write_graph


def _int_list(text):
    return [int(x) for x in text.replace(",", " ").split()]


def _write_report(report, out, json_out):
    if out:
        with open(out, "w") as fh:
            fh.write(report.to_csv())
    else:
        sys.stdout.write(report.to_csv())
    if json_out:
        with open(json_out, "w") as fh:
            fh.write(report.to_json())


def cmd_gen(args):
    G = generate_graph(args.model, args.n, args.seed)
    write_graph(G, args.out)
    print(f"wrote {args.out}: n={G.n_vertices} pairs={len(G.edges)} edges={G.n_edges()}")
    return 0


def cmd_run(args):
    with open(args.config) as fh:
        cfg = ExperimentConfig.from_dict(json.load(fh))
    report = run_experiment(cfg)
    _write_report(report, args.out, args.json)
    agg = report.aggregates()
    print(f"success rate {agg['success_rate']:.3f} over {len(report.rows)} trials", file=sys.stderr)
    return 0 if report.passed() else 1


def cmd_adv(args):
    cfg = ExperimentConfig(algorithm=args.algo, n=_int_list(args.n), r=args.r, seed=args.seed,
                           trials=args.trials, mode="adversary", budget_fraction=args.budget_fraction)
    report = run_experiment(cfg)
    for row in report.rows:
        status = "refuted" if row.success else (row.error or "not refuted")
        print(f"{row.algo} n={row.n} r={row.r} seed={row.seed} per_round={row.per_round_counts} {status}")
    print(f"refutation rate {report.success_rate():.3f}")
    return 0 if report.success_rate() == 1.0 else 1


def cmd_bench(args):
    cfg = ExperimentConfig(algorithm=args.algo, n=_int_list(args.n_list), r=args.r, seed=args.seed,
                           trials=args.trials, model=args.model)
    report = run_experiment(cfg)
    agg = report.aggregates()
    print(f"{'n':>6} {'trials':>6} {'success':>8} {'mean_total':>12} {'max_total':>10} {'max_rounds':>10}")
    for n, a in agg["by_n"].items():
        print(f"{n:>6} {a['trials']:>6} {a['success_rate']:>8.3f} {a['mean_total']:>12.1f} "
              f"{a['max_total']:>10} {a['max_rounds']:>10}")
    try:
        rows = [{"n": n, "y": a["max_total"]} for n, a in agg["by_n"].items()]
        fit = fit_scaling(rows, "n", "y")
        print(f"log-log slope of worst-case total queries vs n: {fit.slope:.3f} (residual {fit.residual:.3f})")
    except DegenerateData as exc:
        print(f"no fit: {exc}")
    if args.out:
        _write_report(report, args.out, None)
    return 0 if report.passed() else 1


def build_parser():
    p = argparse.ArgumentParser(prog="qgraph", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a graph file")
    g.add_argument("--model", required=True, help='e.g. "er(0.1)", path, "planted_components(3)"')
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="CSV report path (default stdout)")
    r.add_argument("--json", help="also write the JSON report here")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("adv", help="run an algorithm against an adversary")
    a.add_argument("--algo", default="binary_search", choices=["binary_search", "row_search"])
    a.add_argument("--n", default="16,64,256")
    a.add_argument("--r", type=int, default=2)
    a.add_argument("--budget-fraction", type=float, default=None,
                   help="share of the adversary's budget the algorithm may use per round")
    a.add_argument("--trials", type=int, default=1)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_adv)

    b = sub.add_parser("bench", help="scaling table and log-log fit")
    b.add_argument("--algo", required=True)
    b.add_argument("--n-list", required=True)
    b.add_argument("--r", type=int, default=1)
    b.add_argument("--model", default=None)
    b.add_argument("--trials", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", help="CSV report path")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidConfig, InvalidModelParams, OSError) as exc:
        print(f"qgraph: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
