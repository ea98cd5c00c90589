#!/usr/bin/env python3
"""Run the Monte Carlo experiments and write CSV/JSON results.

    python scripts/run_experiments.py                 # everything
    python scripts/run_experiments.py probe randassign --quick
"""

from __future__ import annotations

import argparse
import csv
import json
import time
from pathlib import Path

from classmatch.experiments import (
    ExperimentConfig,
    GridPoint,
    estimate_expectations,
    heavy_edge_statistics,
    lemma3_probe,
    rand_assign_estimator,
    run_sweep,
)

HERE = Path(__file__).resolve().parent
SEED = 20240601


def sweep(name: str, out: Path, quick: bool):
    cfg = ExperimentConfig.load(HERE / "configs" / name)
    if quick:
        import dataclasses
        cfg = dataclasses.replace(cfg, trials=max(1, cfg.trials // 20))
    res = run_sweep(cfg)
    stem = Path(name).stem
    (out / f"{stem}.csv").write_text(res.to_csv())
    (out / f"{stem}.json").write_text(json.dumps(res.to_json(), indent=2))
    return {"ok": res.ok, "checks": res.checks}


def expectations(out: Path, quick: bool):
    scale = 20 if quick else 1
    tables = [estimate_expectations(GridPoint((1, 1), 10), 100_000 // scale, SEED),
              estimate_expectations(GridPoint((2, 2), 100), 100_000 // scale, SEED),
              estimate_expectations(GridPoint((50, 50), 208), 10_000 // scale, SEED)]
    data = [t.to_json() for t in tables]
    (out / "expectations.json").write_text(json.dumps(data, indent=2))
    return {"own": [r["mean"] for d in data for r in d["own"]],
            "gap": [r["mean"] for d in data for r in d["gaps"]]}


def probe(out: Path, quick: bool):
    trials = 50_000 if quick else 1_000_000
    rows = []
    for n, m, r in [(1, 1, 1), (2, 2, 1), (3, 3, 1), (2, 2, 2), (3, 3, 2), (3, 3, 3)]:
        res = lemma3_probe(n, m, r, [0.2, 0.1, 0.05], trials, SEED)
        rows.append(res.to_json())
    (out / "probe.json").write_text(json.dumps(rows, indent=2))
    with open(out / "probe.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "m", "r", "trials", "extrapolated", "identity_rhs", "gap", "gap_se",
                    "direct_rhs", "direct_gap", "direct_gap_se"])
        for d in rows:
            w.writerow([d["n"], d["m"], d["r"], d["trials"]] +
                       [f"{d[k]:.6f}" for k in ("extrapolated", "identity_rhs", "gap", "gap_se",
                                                 "direct_rhs", "direct_gap", "direct_gap_se")])
    return {f"{d['n']}x{d['m']} r={d['r']}": (d["agrees"], d["agrees_direct"]) for d in rows}


def randassign(out: Path, quick: bool):
    trials = 50_000 if quick else 1_000_000
    rows = [rand_assign_estimator(n, n, n, 1.0, trials, SEED).to_json() for n in (1, 2, 3, 5)]
    (out / "rand_assign.json").write_text(json.dumps(rows, indent=2))
    return {r["n"]: r["matches"] for r in rows}


def heavy(out: Path, quick: bool):
    trials = 100 if quick else 2000
    rows = heavy_edge_statistics([(n, n) for n in (20, 50, 100, 200)], "k*(n_p+2)", trials, SEED)
    with open(out / "heavy_edge.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_p", "m", "trials", "q01", "median", "c_hat"])
        for r in rows:
            w.writerow([r.n_p, r.m, r.trials, f"{r.q01:.6f}", f"{r.median:.6f}", f"{r.c_hat:.4f}"])
    return {r.n_p: round(r.c_hat, 3) for r in rows}


EXPERIMENTS = {
    "max_weight": lambda o, q: sweep("max_weight_trend.toml", o, q),
    "round_robin": lambda o, q: sweep("round_robin_trend.toml", o, q),
    "greedy_house": lambda o, q: sweep("greedy_house.json", o, q),
    "truncnorm": lambda o, q: sweep("truncnorm_round_robin.json", o, q),
    "expectations": expectations,
    "probe": probe,
    "randassign": randassign,
    "heavy": heavy,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("names", nargs="*", choices=[[]] + list(EXPERIMENTS), default=[],
                    metavar="NAME", help=f"subset of: {', '.join(EXPERIMENTS)}")
    ap.add_argument("--out", default="results")
    ap.add_argument("--quick", action="store_true", help="about 1/20 of the trials")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.names or list(EXPERIMENTS):
        start = time.perf_counter()
        summary = EXPERIMENTS[name](out, args.quick)
        print(f"{name}: {summary} ({time.perf_counter() - start:.1f}s)", flush=True)


if __name__ == "__main__":
    main()
