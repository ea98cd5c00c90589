"""Command-line entry point: ``classmatch <subcommand> ...``.

Exit codes: 0 success, 1 a sweep assertion failed, 2 usage error (including an
unknown subcommand), 3 invalid input. Errors go to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

from . import bounds
from .audit import PREDICATES, audit
from .core_graph import Instance, Matching
from .distributions import spec_from_dict
from .experiments import (
    ExperimentConfig,
    GridPoint,
    estimate_expectations,
    heavy_edge_statistics,
    lemma3_probe,
    rand_assign_estimator,
    run_sweep,
)
from .mechanisms import MECHANISMS, GreedyHouseFailure, round_robin, run_mechanism

EXIT_ASSERTION = 1
EXIT_USAGE = 2
EXIT_INVALID = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(obj, out: str | None):
    text = obj if isinstance(obj, str) else json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load_matching(path: str) -> Matching:
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data["matching"]
    return Matching.from_json(data)


def _dist(arg: str | None):
    if arg is None:
        return spec_from_dict({"kind": "uniform01"})
    if Path(arg).exists():
        return spec_from_dict(json.loads(Path(arg).read_text()))
    return spec_from_dict(json.loads(arg) if arg.lstrip().startswith("{") else {"kind": arg})


def _params(items: list[str]) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"expected key=value, got {item!r}")
        key, val = item.split("=", 1)
        out[key] = json.loads(val)
    return out


# ---------------------------------------------------------------- subcommands

def cmd_solve(args) -> int:
    inst = Instance.load(args.instance)
    kw = {"collision": args.collision} if args.mechanism == "greedy-house" else {}
    if args.mechanism == "round-robin":
        matching, trace = round_robin(inst)
        if args.trace:
            _emit(trace.to_json(), args.trace)
    else:
        matching = run_mechanism(args.mechanism, inst, **kw)
    _emit({"mechanism": args.mechanism, "matching": matching.to_json(),
           "weight": matching.weight(inst.utilities)}, args.out)
    return 0


def cmd_audit(args) -> int:
    inst = Instance.load(args.instance)
    matching = _load_matching(args.matching)
    preds = args.predicates.split(",") if args.predicates else ("class_ef", "cef1", "mcef1",
                                                                "non_wasteful")
    rep = audit(inst, matching, alpha=args.alpha, predicates=preds)
    _emit(rep.to_json(), args.out)
    return 0


def cmd_bounds(args) -> int:
    p = _params(args.params)
    w = args.which
    if w == "thm1":
        res = bounds.theorem1_disjoint_bundle_lower_bound(p["class_sizes"], p["m"]).to_json()
    elif w == "lem6":
        res = {"value": bounds.lemma6_lower_bound(p["n_p"], p["m"], p["k"], p.get("alpha", 1.0))}
    elif w == "lem7":
        res = {"value": bounds.lemma7_upper_bound(p["n_p"], p["n_q"], p.get("alpha", 1.0),
                                                  p.get("beta", 1.0), p.get("edge_weights"))}
    elif w == "lem12":
        res = bounds.lemma12_expected_gap(bounds.BoundInputs(**p)).to_json()
    elif w == "lem13":
        res = {"value": bounds.lemma13_double_sum(p["n_p"], p["n_q"])}
    else:
        res = {f: bounds.random_assignment_expectation(p["n"], p["m"], p["r"], f)
               for f in ("paper_inline", "coppersmith_sorkin")}
    _emit({"which": w, "params": p, **res}, args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.trials is not None:
        over["trials"] = args.trials
    if args.workers is not None:
        over["workers"] = args.workers
    if over:
        cfg = dataclasses.replace(cfg, **over)
    res = run_sweep(cfg)
    out = args.out or cfg.output
    _emit(res.to_csv(), out)
    if args.json:
        _emit(res.to_json(), args.json)
    if not res.ok:
        failed = [c for c in res.checks if not c["holds"]]
        print(json.dumps({"error": "assertion failed", "checks": failed}), file=sys.stderr)
        return EXIT_ASSERTION
    return 0


def cmd_probe(args) -> int:
    if args.lemma != 3:
        raise ValueError(f"only the auxiliary-item probe (--lemma 3) is available, got {args.lemma}")
    res = lemma3_probe(args.n, args.m, args.r, args.rates, args.trials, args.seed,
                       _dist(args.distribution))
    rows = [[args.n, args.m, args.r, row.rate, args.trials, f"{row.ratio:.6f}", f"{row.se:.6f}"]
            for row in res.rows]
    rows.append([args.n, args.m, args.r, 0, args.trials, f"{res.extrapolated:.6f}",
                 f"{res.extrapolated_se:.6f}"])
    _emit(_csv(["n", "m", "r", "rate", "trials", "ratio", "se"], rows), args.out)
    if args.json:
        _emit(res.to_json(), args.json)
    return 0


def cmd_rand_assign(args) -> int:
    res = rand_assign_estimator(args.n, args.m, args.r, args.rate, args.trials, args.seed)
    z = res.z_scores
    rows = [[res.n, res.m, res.r, res.rate, res.trials, f"{res.mean:.6f}", f"{res.se:.6f}",
             f"{res.paper_inline:.6f}", f"{res.coppersmith_sorkin:.6f}",
             f"{z['paper_inline']:.3f}", f"{z['coppersmith_sorkin']:.3f}", "+".join(res.matches)]]
    _emit(_csv(["n", "m", "r", "rate", "trials", "mean", "se", "paper_inline",
                "coppersmith_sorkin", "z_paper_inline", "z_coppersmith_sorkin", "matches"], rows),
          args.out)
    if args.json:
        _emit(res.to_json(), args.json)
    return 0


def cmd_expectations(args) -> int:
    point = GridPoint(tuple(args.class_sizes), args.m)
    table = estimate_expectations(point, args.trials, args.seed, _dist(args.distribution),
                                  args.gap_slack)
    _emit(table.to_json(), args.out)
    return 0


def cmd_heavy_edge(args) -> int:
    sizes = [(n,) * args.k for n in args.n_p]
    rows = heavy_edge_statistics(sizes, args.m_rule, args.trials, args.seed,
                                 _dist(args.distribution))
    _emit(_csv(["n_p", "m", "trials", "q01", "median", "c_hat"],
               [[r.n_p, r.m, r.trials, f"{r.q01:.6f}", f"{r.median:.6f}", f"{r.c_hat:.6f}"]
                for r in rows]), args.out)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="classmatch", description="Class-fair one-sided matching toolkit.")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("solve", help="run a mechanism on an instance")
    s.add_argument("--mechanism", required=True, choices=MECHANISMS)
    s.add_argument("--instance", required=True, help="instance JSON (class_sizes, utilities)")
    s.add_argument("--trace", help="write the round-robin pick trace to this JSON file")
    s.add_argument("--collision", default="repick", choices=("repick", "defer"),
                   help="greedy-house collision rule")
    s.add_argument("--out", help="output file (default stdout)")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("audit", help="check fairness and efficiency predicates")
    s.add_argument("--instance", required=True)
    s.add_argument("--matching", required=True, help="matching JSON, as written by solve")
    s.add_argument("--alpha", type=float, default=0.5, help="CEF1 factor in (0, 1]")
    s.add_argument("--predicates", help=f"comma-separated subset of {','.join(PREDICATES)}")
    s.add_argument("--out")
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("bounds", help="evaluate a closed-form bound")
    s.add_argument("--which", required=True,
                   choices=("thm1", "lem6", "lem7", "lem12", "lem13", "randassign"))
    s.add_argument("--params", nargs="*", default=[], metavar="KEY=VALUE",
                   help="values are JSON, e.g. class_sizes=[2,2] m=100")
    s.add_argument("--out")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("sweep", help="run a Monte Carlo sweep from a TOML or JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="CSV output (default: config output, else stdout)")
    s.add_argument("--json", help="also write the JSON summary here")
    s.add_argument("--seed", type=int)
    s.add_argument("--trials", type=int)
    s.add_argument("--workers", type=int, help="worker processes, capped by CLASSMATCH_THREADS")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("probe", help="auxiliary-item membership probe")
    s.add_argument("--lemma", type=int, default=3)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--r", type=int, required=True)
    s.add_argument("--rates", type=float, nargs="+", default=[0.2, 0.1, 0.05])
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--distribution", help="kind name, JSON object or JSON file")
    s.add_argument("--out")
    s.add_argument("--json")
    s.set_defaults(func=cmd_probe)

    s = sub.add_parser("rand-assign", help="random assignment cost estimate")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--r", type=int, required=True)
    s.add_argument("--rate", type=float, default=1.0)
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--json")
    s.set_defaults(func=cmd_rand_assign)

    s = sub.add_parser("expectations", help="round-robin own and cross valuation means")
    s.add_argument("--class-sizes", type=int, nargs="+", required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--gap-slack", type=float, default=0.0)
    s.add_argument("--distribution")
    s.add_argument("--out")
    s.set_defaults(func=cmd_expectations)

    s = sub.add_parser("heavy-edge", help="lightest matched edge statistics under round-robin")
    s.add_argument("--n-p", type=int, nargs="+", required=True)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--m-rule", default="k*(n_p+2)")
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--distribution")
    s.add_argument("--out")
    s.set_defaults(func=cmd_heavy_edge)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, KeyError, TypeError, OSError, GreedyHouseFailure,
            json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
