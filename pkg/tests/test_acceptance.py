"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line; the lines are repeated in the terminal
summary. Thresholds marked as harness parameters are not analytic values.
"""

import json
import math
import time

import numpy as np
import pytest

from classmatch.audit import audit
from classmatch.bounds import lemma13_double_sum
from classmatch.core_graph import Instance, max_weight_of_size_matrix, ssp_trace
from classmatch.distributions import Seed
from classmatch.experiments import (
    ExperimentConfig,
    GridPoint,
    estimate_expectations,
    grid_instances,
    lemma3_probe,
    rand_assign_estimator,
    run_sweep,
    size_r_optimum,
)
from classmatch.mechanisms import max_weight_mechanism, round_robin
from conftest import TABLE1_PATH, record_criterion

SEED = 20240601
PROP1_PREDICATES = ("cef1", "mcef1", "non_wasteful")


# ---------------------------------------------------------------- artifact builders

def table1_artifact() -> str:
    inst = Instance.load(TABLE1_PATH)
    mw = max_weight_mechanism(inst)
    rr, _ = round_robin(inst)
    return json.dumps({"max_weight": {"matching": mw.to_json(),
                                      "weight": mw.weight(inst.utilities),
                                      "audit": audit(inst, mw).to_json()},
                       "round_robin": {"matching": rr.to_json(),
                                       "audit": audit(inst, rr).to_json()}}, sort_keys=True)


def nested_sets(weights):
    """Vertex sets of the successive optimal matchings, from the augmenting-path trace."""
    paths, _ = ssp_trace(weights, min(weights.shape))
    rows, cols, out = set(), set(), []
    for p in paths:
        rows, cols = rows | set(p.agents), cols | set(p.items)
        out.append((set(rows), set(cols)))
    return out


def nesting_check(weights, continuous: bool) -> int:
    """Violations of nesting for one weight matrix.

    Continuous weights: the independent one-shot optimum of each size must be
    nested. Tied weights: the nested trace must be optimal at every size.
    """
    bad = 0
    if continuous:
        prev = (set(), set())
        for r in range(1, min(weights.shape) + 1):
            _, rs, cs = size_r_optimum(weights, r)
            bad += not (prev[0] <= rs and prev[1] <= cs)
            prev = (rs, cs)
    else:
        sets = nested_sets(weights)
        for r, (rs, cs) in enumerate(sets, start=1):
            bad += len(rs) != r or len(cs) != r
            if r > 1:
                bad += not (sets[r - 2][0] <= rs and sets[r - 2][1] <= cs)
            best, _, _ = size_r_optimum(weights, r)
            bad += abs(max_weight_of_size_matrix(weights, r) - best) > 1e-9
    return bad


def prop1_random(trials: int, seed: int = SEED) -> dict:
    fails, nest_bad = 0, 0
    for t in range(trials):
        rng = Seed(seed, t).generator()
        k = int(rng.integers(2, 4))
        sizes = tuple(int(x) for x in rng.integers(1, 7, k))
        inst = Instance(sizes, rng.random((sum(sizes), k * (max(sizes) + 2))))
        matching, _ = round_robin(inst)
        rep = audit(inst, matching, alpha=0.5, predicates=PROP1_PREDICATES)
        fails += not all(rep.verdicts.values())
        nest_bad += nesting_check(inst.utilities, continuous=True)
        for p in range(k):
            bundle = sorted(matching.bundle(inst, p))
            if bundle:
                w = inst.utilities[np.ix_(inst.class_agents(p), bundle)]
                nest_bad += nesting_check(w, continuous=True)
    return {"instances": trials, "failures": fails, "nesting_violations": nest_bad}


def prop1_exhaustive(max_instances: int | None = None) -> dict:
    # binary utilities up to 4 agents and 5 items, three levels up to 3 agents and 4 items
    families = [((0.0, 1.0), range(2, 5), range(1, 6)),
                ((0.0, 0.5, 1.0), range(2, 4), range(1, 5))]
    count, fails, nest_bad = 0, 0, 0
    for levels, ns, ms in families:
        for n in ns:
            for m in ms:
                for inst in grid_instances(levels, n, m):
                    if max_instances is not None and count >= max_instances:
                        return {"instances": count, "failures": fails,
                                "nesting_violations": nest_bad}
                    count += 1
                    matching, _ = round_robin(inst)
                    rep = audit(inst, matching, alpha=0.5, predicates=PROP1_PREDICATES)
                    fails += not all(rep.verdicts.values())
                    if inst.class_sizes == (1, n - 1):  # once per utility matrix
                        nest_bad += nesting_check(inst.utilities, continuous=False)
    return {"instances": count, "failures": fails, "nesting_violations": nest_bad}


def thm1_sweep(trials: int = 2000) -> tuple[ExperimentConfig, object]:
    cfg = ExperimentConfig.from_dict({
        "mechanism": "max-weight", "trials": trials, "seed": SEED,
        "predicates": ["class_ef"],
        "grid": [{"k": 2, "n_p": 2, "m": [20, 200, 2000]}],
        "assertions": [{"kind": "thm1_bound", "predicate": "class_ef", "slack": 0.02},
                       {"kind": "nondecreasing", "predicate": "class_ef"}],
    })
    return cfg, run_sweep(cfg)


def thm2_sweep(trials: int = 2000):
    cfg = ExperimentConfig.from_dict({
        "mechanism": "round-robin", "trials": trials, "seed": SEED,
        "predicates": ["class_ef+non_wasteful"],
        "grid": [{"k": 2, "n_p": [10, 25, 50, 100], "m": "k*(n_p+2)"}],
        "assertions": [{"kind": "nondecreasing", "predicate": "class_ef+non_wasteful"},
                       {"kind": "at_least", "predicate": "class_ef+non_wasteful",
                        "threshold": 0.9}],
    })
    return run_sweep(cfg)


def lemma6_tables(trials: int = 100_000):
    return [estimate_expectations(GridPoint((1, 1), 10), trials, SEED),
            estimate_expectations(GridPoint((2, 2), 100), trials, SEED)]


def lemma12_table(trials: int = 10_000):
    return estimate_expectations(GridPoint((50, 50), 4 * 52), trials, SEED)


def probe_results(trials: int = 1_000_000):
    rates = [0.2, 0.1, 0.05]
    return (lemma3_probe(1, 1, 1, rates, trials, SEED),
            lemma3_probe(3, 3, 2, rates, trials, SEED))


def lemma13_values():
    return {n: lemma13_double_sum(n, n) for n in (10**2, 10**3, 10**4)}


def rand_assign_results(trials: int = 1_000_000):
    return (rand_assign_estimator(2, 2, 2, 1.0, trials, SEED),
            rand_assign_estimator(5, 5, 5, 1.0, trials, SEED))


# ---------------------------------------------------------------- criteria

def test_criterion_01_table1_example():
    start = time.perf_counter()
    art = json.loads(table1_artifact())
    elapsed = time.perf_counter() - start
    mw, rr = art["max_weight"], art["round_robin"]
    env = mw["audit"]["pairwise_envy"][1][0]
    ok = (mw["matching"] == [[0, 0], [1, 3], [2, 1], [3, 2]] and mw["weight"] == 13
          and env == {"utility": 3.0, "value_of_other": 4.0, "envies": True}
          and rr["matching"] == [[0, 0], [1, 1], [2, 3], [3, 2]]
          and rr["audit"]["verdicts"]["class_ef"] and rr["audit"]["verdicts"]["non_wasteful"]
          and elapsed < 1.0)
    record_criterion(1, "worked example", ok,
                     f"max-weight {mw['matching']} weight {mw['weight']}, class 2 utility "
                     f"{env['utility']} < {env['value_of_other']}; round-robin {rr['matching']} "
                     f"class-EF and non-wasteful; {elapsed:.3f}s")
    assert ok


@pytest.fixture(scope="module")
def prop1_runs():
    start = time.perf_counter()
    rnd = prop1_random(10_000)
    exh = prop1_exhaustive()
    return rnd, exh, time.perf_counter() - start


def test_criterion_02_half_cef1_everywhere(prop1_runs):
    rnd, exh, elapsed = prop1_runs
    ok = rnd["failures"] == 0 and exh["failures"] == 0 and elapsed < 300
    record_criterion(2, "round-robin is 1/2-CEF1, MCEF1 and non-wasteful", ok,
                     f"{rnd['failures']} failures on {rnd['instances']} random instances, "
                     f"{exh['failures']} on {exh['instances']} grid instances; {elapsed:.0f}s")
    assert ok


def test_criterion_03_nesting(prop1_runs):
    rnd, exh, _ = prop1_runs
    ok = rnd["nesting_violations"] == 0 and exh["nesting_violations"] == 0
    record_criterion(3, "nested optimal matchings", ok,
                     f"{rnd['nesting_violations']} violations on random trials "
                     f"(one-shot optima per size), {exh['nesting_violations']} on grid "
                     f"instances (trace optimal at every size)")
    assert ok


def test_criterion_04_max_weight_trend():
    start = time.perf_counter()
    cfg, res = thm1_sweep()
    elapsed = time.perf_counter() - start
    bound_chk, trend_chk = res.checks
    parts = ", ".join(f"m={r['m']}: {r['p_hat']:.4f} vs {r['bound']:.4f}"
                      for r in bound_chk["points"])
    ok = bound_chk["holds"] and trend_chk["holds"] and elapsed < 600
    record_criterion(4, "max-weight class-EF rate above the disjoint-bundle bound", ok,
                     f"{parts}; nondecreasing={trend_chk['holds']}; {elapsed:.0f}s")
    assert ok


def test_criterion_05_round_robin_trend():
    start = time.perf_counter()
    res = thm2_sweep()
    elapsed = time.perf_counter() - start
    trend, floor = res.checks
    series = ", ".join(f"{x:.4f}" for x in trend["p_hat"])
    ok = trend["holds"] and floor["holds"] and elapsed < 1800
    record_criterion(5, "round-robin class-EF and non-wasteful rate", ok,
                     f"n_p=10,25,50,100: {series}; nondecreasing={trend['holds']}; "
                     f"last >= 0.9 (harness threshold)={floor['holds']}; {elapsed:.0f}s")
    assert ok


def test_criterion_06_own_bundle_lower_bound():
    start = time.perf_counter()
    tables = lemma6_tables()
    elapsed = time.perf_counter() - start
    rows = [t.own[0] for t in tables]
    ok = all(r.mean >= r.bound - 3 * r.se for r in rows) and elapsed < 300
    record_criterion(6, "own-bundle value above its lower bound", ok,
                     "; ".join(f"n_p={r.n_p}: {r.mean:.5f} (SE {r.se:.5f}) vs {r.bound:.5f}"
                               for r in rows) + f"; {elapsed:.0f}s")
    assert ok


def test_criterion_07_expected_gap_sign():
    start = time.perf_counter()
    t = lemma12_table()
    elapsed = time.perf_counter() - start
    g = t.gaps[0]
    # one-sided 95%: the gap exceeds zero by at least 1.645 standard errors
    ok = g.mean - 1.6449 * g.se > 0 and elapsed < 600
    record_criterion(7, "own bundle beats the other bundle in expectation", ok,
                     f"gap {g.mean:.4f} (SE {g.se:.4f}), leading bound {g.bound:.4f}; "
                     f"{elapsed:.0f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason="the identity is inexact for r >= 2: it replaces the "
                                       "mean of the r leave-one-out (r-1)-optima by the "
                                       "overall (r-1)-optimum")
def test_criterion_08_auxiliary_item_identity():
    start = time.perf_counter()
    one, three = probe_results()
    elapsed = time.perf_counter() - start
    ok_one = one.agrees and abs(one.extrapolated - 0.5) <= 3 * one.extrapolated_se
    ok_three = three.agrees
    ok = ok_one and ok_three and elapsed < 900
    record_criterion(8, "auxiliary-item identity", ok,
                     f"n=m=1: {one.extrapolated:.4f} vs 0.5 (gap SE {one.gap_se:.4f}); "
                     f"n=m=3,r=2: {three.extrapolated:.4f} vs {three.identity_rhs:.4f}, "
                     f"gap {three.gap:.4f} = {abs(three.gap) / three.gap_se:.0f} SE "
                     f"(exact leave-one-out form {three.direct_rhs:.4f}, "
                     f"{abs(three.direct_gap) / three.direct_gap_se:.1f} SE); {elapsed:.0f}s")
    assert ok


def test_criterion_08_single_edge_part():
    one = lemma3_probe(1, 1, 1, [0.2, 0.1, 0.05], 1_000_000, SEED)
    assert one.agrees and abs(one.extrapolated - 0.5) <= 3 * one.extrapolated_se


def test_criterion_09_double_sum():
    start = time.perf_counter()
    vals = lemma13_values()
    elapsed = time.perf_counter() - start
    seq = [vals[n] for n in sorted(vals)]
    ok = (vals[10**4] <= math.pi**2 / 6 + 0.05
          and all(a <= b for a, b in zip(seq, seq[1:]))
          and max(seq) <= math.pi**2 / 6 + 0.05 and elapsed < 1)
    record_criterion(9, "double sum bounded by pi^2/6 + 0.05", ok,
                     ", ".join(f"n={n}: {v:.5f}" for n, v in vals.items())
                     + f" (pi^2/6 = {math.pi**2 / 6:.5f})")
    assert ok


def test_criterion_10_random_assignment():
    start = time.perf_counter()
    two, five = rand_assign_results()
    elapsed = time.perf_counter() - start
    ref5 = sum(1 / k**2 for k in range(1, 6))
    ok = (two.se <= 0.002 and two.matches == ["coppersmith_sorkin"]
          and abs(five.mean - ref5) <= 3 * five.se and elapsed < 600)
    record_criterion(10, "random assignment formula adjudication", ok,
                     f"n=m=r=2: {two.mean:.5f} (SE {two.se:.5f}) matches "
                     f"{'+'.join(two.matches) or 'neither'}; z vs 1.0 = "
                     f"{two.z_scores['paper_inline']:.0f}, z vs 1.25 = "
                     f"{two.z_scores['coppersmith_sorkin']:.2f}; n=m=r=5: {five.mean:.5f} vs "
                     f"{ref5:.4f} (SE {five.se:.5f}); {elapsed:.0f}s")
    assert ok


def test_criterion_11_determinism():
    def artifacts():
        out = {"table1.json": table1_artifact()}
        out["max_weight.csv"] = thm1_sweep()[1].to_csv()
        out["round_robin.csv"] = thm2_sweep(trials=50).to_csv()
        out["prop1.json"] = json.dumps([prop1_random(300), prop1_exhaustive(3000)])
        out["own_bundle.json"] = json.dumps([t.to_json() for t in lemma6_tables(5000)])
        out["gap.json"] = json.dumps(lemma12_table(50).to_json())
        out["probe.json"] = json.dumps([r.to_json() for r in probe_results()])
        out["double_sum.json"] = json.dumps(lemma13_values())
        out["rand_assign.json"] = json.dumps([r.to_json() for r in rand_assign_results()])
        return out

    first, second = artifacts(), artifacts()
    diff = [k for k in first if first[k].encode() != second[k].encode()]
    ok = not diff
    record_criterion(11, "byte-identical reruns", ok,
                     f"{len(first)} artifacts compared" + (f", differing: {diff}" if diff else ""))
    assert ok
