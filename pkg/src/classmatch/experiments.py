"""Seeded Monte Carlo harness.

Trial ``t`` of every experiment draws from stream ``t`` of the configured seed,
so results do not depend on how trials are split across workers. Aggregates
are plain sums over trials taken in index order.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import norm

from . import bounds
from .audit import audit
from .core_graph import Instance, max_weight_of_size_matrix, ssp_trace
from .distributions import (
    DistributionSpec,
    Exponential,
    Seed,
    Uniform01,
    sample_utilities,
    spec_from_dict,
)
from .mechanisms import GreedyHouseFailure, round_robin, run_mechanism

Z95 = float(norm.ppf(0.975))


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1 + z**2 / trials
    centre = (p + z**2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2)) / denom
    # the exact endpoints at s = 0 and s = n are 0 and 1; rounding can miss them
    lo = 0.0 if successes == 0 else min(p, max(0.0, centre - half))
    hi = 1.0 if successes == trials else max(p, min(1.0, centre + half))
    return lo, hi


def mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return float(x.mean()) if len(x) else float("nan"), float("nan")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def workers_from_env(requested: int | None = None) -> int:
    cap = os.environ.get("CLASSMATCH_THREADS")
    n = requested or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


# ---------------------------------------------------------------- configs

@dataclass(frozen=True)
class GridPoint:
    class_sizes: tuple[int, ...]
    m: int

    @property
    def k(self) -> int:
        return len(self.class_sizes)

    def label(self) -> dict:
        return {"k": self.k, "class_sizes": "-".join(map(str, self.class_sizes)), "m": self.m}


def _resolve_rule(rule, env: dict) -> int:
    if isinstance(rule, (int, float)):
        return int(rule)
    # size rules are small arithmetic expressions over k, n_p, max_n, n
    return int(eval(str(rule), {"__builtins__": {}, "ceil": math.ceil, "e": math.e}, env))


def expand_grid(spec: list[dict]) -> list[GridPoint]:
    """Expand grid entries into concrete points.

    An entry either lists ``class_sizes`` directly or gives ``k`` and a list
    ``n_p`` of equal class sizes; ``m`` is an int, a list, or an expression
    such as ``"k*(max_n+2)"``.
    """
    points = []
    for entry in spec:
        if "class_sizes" in entry:
            sizes_list = [tuple(entry["class_sizes"])]
        else:
            k = int(entry["k"])
            nps = entry["n_p"] if isinstance(entry["n_p"], list) else [entry["n_p"]]
            sizes_list = [(int(n),) * k for n in nps]
        for sizes in sizes_list:
            env = {"k": len(sizes), "n_p": sizes[0], "max_n": max(sizes), "n": sum(sizes)}
            ms = entry["m"] if isinstance(entry["m"], list) else [entry["m"]]
            for m in ms:
                points.append(GridPoint(tuple(sizes), _resolve_rule(m, env)))
    if not points:
        raise ValueError("grid is empty")
    return points


@dataclass(frozen=True)
class ExperimentConfig:
    mechanism: str
    grid: tuple[GridPoint, ...]
    trials: int
    seed: int = 0
    distribution: DistributionSpec = Uniform01()
    predicates: tuple[str, ...] = ("class_ef", "non_wasteful")
    alpha: float = 0.5
    output: str | None = None
    workers: int = 1
    record_timing: bool = False
    assertions: tuple[dict, ...] = ()

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.grid:
            raise ValueError("grid is empty")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        dist = data.get("distribution", {"kind": "uniform01"})
        return cls(
            mechanism=data["mechanism"],
            grid=tuple(expand_grid(data["grid"])),
            trials=int(data["trials"]),
            seed=int(data.get("seed", 0)),
            distribution=spec_from_dict(dist) if isinstance(dist, dict) else dist,
            predicates=tuple(data.get("predicates", ("class_ef", "non_wasteful"))),
            alpha=float(data.get("alpha", 0.5)),
            output=data.get("output"),
            workers=int(data.get("workers", 1)),
            record_timing=bool(data.get("record_timing", False)),
            assertions=tuple(data.get("assertions", ())),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python 3.10
                import tomli as tomllib
            with open(path, "rb") as fh:
                return cls.from_dict(tomllib.load(fh))
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------- sweeps

def _base_predicates(preds: Sequence[str]) -> list[str]:
    out = []
    for p in preds:
        for part in p.split("+"):
            if part not in out:
                out.append(part)
    return out


def _trial(mechanism: str, dist, point: GridPoint, seed: int, t: int,
           predicates: Sequence[str], alpha: float) -> tuple[dict[str, bool] | None, str | None]:
    n = sum(point.class_sizes)
    u = sample_utilities(dist, n, point.m, Seed(seed, t))
    inst = Instance(point.class_sizes, u)
    try:
        matching = run_mechanism(mechanism, inst)
    except GreedyHouseFailure as exc:
        return None, str(exc)
    rep = audit(inst, matching, alpha=alpha, predicates=_base_predicates(predicates))
    out = {}
    for pred in predicates:
        out[pred] = all(rep.verdicts[part] for part in pred.split("+"))
    return out, None


def _run_chunk(args):
    mechanism, dist, point, seed, trials, predicates, alpha = args
    return [_trial(mechanism, dist, point, seed, t, predicates, alpha) for t in trials]


@dataclass
class PointResult:
    point: GridPoint
    trials: int
    successes: dict[str, int]
    failures: int = 0  # trials where the mechanism could not produce a matching
    skipped: str | None = None
    runtime_ms: float | None = None

    def p_hat(self, pred: str) -> float:
        return self.successes[pred] / self.trials if self.trials else float("nan")

    def interval(self, pred: str) -> tuple[float, float]:
        return wilson_interval(self.successes[pred], self.trials)


@dataclass
class SweepResult:
    config: ExperimentConfig
    points: list[PointResult]
    checks: list[dict] = field(default_factory=list)

    def series(self, pred: str) -> list[float]:
        return [pr.p_hat(pred) for pr in self.points if pr.skipped is None]

    def nondecreasing(self, pred: str) -> bool:
        """Adjacent points are consistent with a nondecreasing success rate."""
        live = [pr for pr in self.points if pr.skipped is None]
        return all(b.interval(pred)[1] >= a.interval(pred)[0] for a, b in zip(live, live[1:]))

    @property
    def ok(self) -> bool:
        return all(c["holds"] for c in self.checks)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mechanism", "k", "class_sizes", "m", "predicate", "trials", "successes",
                    "p_hat", "wilson_lo", "wilson_hi", "runtime_ms", "note"])
        for pr in self.points:
            lab = pr.point.label()
            rt = "" if pr.runtime_ms is None else f"{pr.runtime_ms:.1f}"
            if pr.skipped is not None:
                w.writerow([self.config.mechanism, lab["k"], lab["class_sizes"], lab["m"], "",
                            0, 0, "", "", "", rt, f"skipped: {pr.skipped}"])
                continue
            for pred in self.config.predicates:
                lo, hi = pr.interval(pred)
                note = f"{pr.failures} mechanism failures" if pr.failures else ""
                w.writerow([self.config.mechanism, lab["k"], lab["class_sizes"], lab["m"], pred,
                            pr.trials, pr.successes[pred], f"{pr.p_hat(pred):.6f}",
                            f"{lo:.6f}", f"{hi:.6f}", rt, note])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "mechanism": self.config.mechanism,
            "points": [{**pr.point.label(), "trials": pr.trials, "successes": pr.successes,
                        "skipped": pr.skipped, "failures": pr.failures} for pr in self.points],
            "checks": self.checks,
            "note": "finite-n thresholds are harness parameters, not values from the analysis",
        }


def _preconditions(mechanism: str, point: GridPoint) -> str | None:
    n = sum(point.class_sizes)
    if point.m < 1:
        return "m must be positive"
    if mechanism == "greedy-house" and point.m < n:
        return f"greedy-house needs m >= n ({point.m} < {n})"
    return None


def run_sweep(config: ExperimentConfig) -> SweepResult:
    points = []
    workers = workers_from_env(config.workers)
    for point in config.grid:
        reason = _preconditions(config.mechanism, point)
        if reason is not None:
            points.append(PointResult(point, 0, {p: 0 for p in config.predicates}, skipped=reason))
            continue
        start = time.perf_counter()
        ts = list(range(config.trials))
        args = (config.mechanism, config.distribution, point, config.seed)
        if workers > 1 and config.trials > 1:
            chunks = [ts[i::workers] for i in range(workers)]
            with ProcessPoolExecutor(workers) as ex:
                parts = list(ex.map(_run_chunk, [args + (c, config.predicates, config.alpha)
                                                 for c in chunks]))
            outcomes = [None] * config.trials
            for c, part in zip(chunks, parts):
                for t, res in zip(c, part):
                    outcomes[t] = res
        else:
            outcomes = _run_chunk(args + (ts, config.predicates, config.alpha))
        succ = {p: 0 for p in config.predicates}
        fails = 0
        for verdicts, err in outcomes:
            if verdicts is None:
                fails += 1
                continue
            for p, v in verdicts.items():
                succ[p] += bool(v)
        elapsed = (time.perf_counter() - start) * 1000 if config.record_timing else None
        points.append(PointResult(point, config.trials, succ, fails, runtime_ms=elapsed))
    result = SweepResult(config, points)
    result.checks = [evaluate_assertion(result, a) for a in config.assertions]
    return result


def evaluate_assertion(result: SweepResult, spec: dict) -> dict:
    """Supported kinds: ``nondecreasing``, ``at_least`` (last point by default), ``thm1_bound``."""
    kind = spec["kind"]
    pred = spec["predicate"]
    live = [pr for pr in result.points if pr.skipped is None]
    if kind == "nondecreasing":
        holds = result.nondecreasing(pred)
        detail = {"p_hat": result.series(pred)}
    elif kind == "at_least":
        idx = int(spec.get("point", -1))
        value = live[idx].p_hat(pred)
        holds = value >= float(spec["threshold"])
        detail = {"p_hat": value, "threshold": float(spec["threshold"])}
    elif kind == "thm1_bound":
        slack = float(spec.get("slack", 0.0))
        rows = []
        for pr in live:
            b = bounds.theorem1_disjoint_bundle_lower_bound(pr.point.class_sizes, pr.point.m).product
            rows.append({"m": pr.point.m, "p_hat": pr.p_hat(pred), "bound": b,
                         "holds": pr.p_hat(pred) >= b - slack})
        holds = all(r["holds"] for r in rows)
        detail = {"points": rows, "slack": slack}
    else:
        raise ValueError(f"unknown assertion kind {kind!r}")
    return {"kind": kind, "predicate": pred, "holds": bool(holds), **detail,
            "harness_parameter": kind != "thm1_bound"}


# ---------------------------------------------------------------- expectations

@dataclass
class ExpectationRow:
    p: int
    q: int | None
    n_p: int
    n_q: int | None
    mean: float
    se: float
    bound: float | None = None
    holds: bool | None = None

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ExpectationTable:
    point: GridPoint
    trials: int
    own: list[ExpectationRow]       # E[X_p] against the lower bound
    cross: list[ExpectationRow]     # E[X_pq]
    gaps: list[ExpectationRow]      # E[X_p] - E[X_pq] against the leading gap term

    def to_json(self) -> dict:
        return {**self.point.label(), "trials": self.trials,
                "own": [r.to_json() for r in self.own],
                "cross": [r.to_json() for r in self.cross],
                "gaps": [r.to_json() for r in self.gaps]}


def expectation_samples(point: GridPoint, trials: int, seed: int,
                        dist: DistributionSpec = Uniform01()) -> tuple[np.ndarray, np.ndarray]:
    """Per-trial ``X[t, p] = v_p(own bundle)`` and ``Y[t, p, q] = v_p(q's bundle)`` under round-robin."""
    k = point.k
    X = np.zeros((trials, k))
    Y = np.zeros((trials, k, k))
    for t in range(trials):
        inst = Instance(point.class_sizes,
                        sample_utilities(dist, sum(point.class_sizes), point.m, Seed(seed, t)))
        matching, _ = round_robin(inst)
        bundles = [sorted(matching.bundle(inst, p)) for p in range(k)]
        for p in range(k):
            rows = inst.class_agents(p)
            for q in range(k):
                if not bundles[q]:
                    continue
                w = inst.utilities[np.ix_(rows, bundles[q])]
                r_, c_ = linear_sum_assignment(w, maximize=True)
                val = float(w[r_, c_].sum())
                if p == q:
                    X[t, p] = val
                else:
                    Y[t, p, q] = val
    return X, Y


def estimate_expectations(point: GridPoint, trials: int, seed: int = 0,
                          dist: DistributionSpec = Uniform01(),
                          gap_slack: float = 0.0) -> ExpectationTable:
    """Round-robin means of own and cross valuations, checked against the analytic bounds.

    The own-bundle bound must hold up to three standard errors. The gap check
    uses ``gap_slack`` to stand in for the unspecified ``O(1/min)`` term.
    """
    alpha, beta = getattr(dist, "pdf_bounds", (1.0, 1.0))
    X, Y = expectation_samples(point, trials, seed, dist)
    k, m = point.k, point.m
    own, cross, gaps = [], [], []
    for p in range(k):
        n_p = point.class_sizes[p]
        mu, se = mean_se(X[:, p])
        try:
            b = bounds.lemma6_lower_bound(n_p, m, k, alpha)
        except bounds.ConditionViolated:
            b = None
        own.append(ExpectationRow(p, None, n_p, None, mu, se, b,
                                  None if b is None else mu >= b - 3 * se))
        for q in range(k):
            if q == p:
                continue
            n_q = point.class_sizes[q]
            mu_c, se_c = mean_se(Y[:, p, q])
            cross.append(ExpectationRow(p, q, n_p, n_q, mu_c, se_c))
            g_mu, g_se = mean_se(X[:, p] - Y[:, p, q])
            d = None
            if m > k:
                d = bounds.lemma12_expected_gap(
                    bounds.BoundInputs(n_p, n_q, m, k, alpha, beta)).value
            gaps.append(ExpectationRow(p, q, n_p, n_q, g_mu, g_se, d,
                                       None if d is None else g_mu >= d - gap_slack - 3 * g_se))
    return ExpectationTable(point, trials, own, cross, gaps)


# ---------------------------------------------------------------- batched brute force

def batch_max_matching(W: np.ndarray, r: int, rows: Sequence[int] | None = None) -> np.ndarray:
    """Best size-``r`` matching weight for each matrix in a ``(T, n, m)`` batch, by enumeration."""
    T, n, m = W.shape
    rows = list(range(n)) if rows is None else list(rows)
    if r == 0:
        return np.zeros(T)
    return best_per_rowset(W[:, rows, :], r)[1].max(axis=1)


def best_per_rowset(W: np.ndarray, r: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """For every ``r``-subset of rows, the best matching saturating exactly those rows.

    Returns the subsets and a ``(T, n_subsets)`` array of weights.
    """
    T, n, m = W.shape
    subsets = list(itertools.combinations(range(n), r))
    if r == 0:
        return subsets, np.zeros((T, 1))
    perms = np.array(list(itertools.permutations(range(m), r)), int)
    out = np.empty((T, len(subsets)))
    for s, rows in enumerate(subsets):
        total = np.zeros((T, len(perms)))
        for e, row in enumerate(rows):
            total += W[:, row, perms[:, e]]
        out[:, s] = total.max(axis=1)
    return subsets, out


# ---------------------------------------------------------------- auxiliary-item probe

@dataclass
class ProbeRow:
    rate: float
    ratio: float   # Pr[aux item matched] / rate
    se: float

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ProbeResult:
    """Auxiliary-item probe outcome.

    ``extrapolated`` estimates ``lim (1/rate) Pr[aux item matched]``.
    ``identity_rhs`` is ``r (1 - (E[X^r] - E[X^{r-1}]))``, the value the
    identity predicts; ``direct_rhs`` is ``sum_i E[1 - X^r + X_i^{r-1}]`` over
    the agents ``i`` of the size-``r`` optimum, which the limit equals exactly.
    Gaps and standard errors are per-trial paired.
    """

    n: int
    m: int
    r: int
    trials: int
    rows: list[ProbeRow]
    extrapolated: float
    extrapolated_se: float
    identity_rhs: float
    identity_rhs_se: float
    gap: float
    gap_se: float
    direct_rhs: float
    direct_gap: float
    direct_gap_se: float
    exact_rhs: float | None = None

    @property
    def agrees(self) -> bool:
        return abs(self.gap) <= 3 * self.gap_se

    @property
    def agrees_direct(self) -> bool:
        return abs(self.direct_gap) <= 3 * self.direct_gap_se

    def to_json(self) -> dict:
        d = asdict(self)
        d["agrees"] = self.agrees
        d["agrees_direct"] = self.agrees_direct
        return d


def _extrapolation_weights(rates: Sequence[float]) -> np.ndarray:
    """Weights turning values at ``rates`` into the least-squares line's intercept."""
    x = np.asarray(rates, float)
    A = np.column_stack([np.ones_like(x), x])
    return np.linalg.pinv(A)[0]


class _Moments:
    def __init__(self):
        self.n = 0
        self.s = 0.0
        self.sq = 0.0

    def add(self, x: np.ndarray):
        self.n += len(x)
        self.s += float(x.sum())
        self.sq += float((x**2).sum())

    def mean_se(self) -> tuple[float, float]:
        mu = self.s / self.n
        var = max(self.sq / self.n - mu**2, 0.0) * self.n / max(self.n - 1, 1)
        return mu, math.sqrt(var / self.n)


def lemma3_probe(n: int, m: int, r: int, rates: Sequence[float], trials: int, seed: int = 0,
                 dist: DistributionSpec = Uniform01(), chunk: int = 100_000) -> ProbeResult:
    """Estimate how often an auxiliary item joins the size-``r`` maximum-weight matching.

    The auxiliary item is joined to the ``r`` agents of the size-``r`` optimum
    by reversed-exponential edges ``1 - E_i / rate``. The same ``E_i ~ Exp(1)``
    serve every rate, so the linear extrapolation to rate 0 is done per trial
    and its standard error is exact. Only small graphs are supported (matchings
    are enumerated).
    """
    rates = [float(x) for x in rates]
    if not rates or min(rates) <= 0:
        raise ValueError("rates must be positive")
    if r < 1 or r > min(n, m):
        raise ValueError(f"need 1 <= r <= min(n, m), got r={r}, n={n}, m={m}")
    coef = _extrapolation_weights(rates)
    hits = np.zeros(len(rates))
    z_mom, d_mom, g_mom, h_mom, dd_mom = _Moments(), _Moments(), _Moments(), _Moments(), _Moments()
    rng = Seed(seed, 0).generator()
    sub_r, _ = best_per_rowset(np.zeros((1, n, m)), r)
    sub_prev, _ = best_per_rowset(np.zeros((1, n, m)), r - 1)
    prev_index = {s: i for i, s in enumerate(sub_prev)}
    # drop[s, e]: index of subset sub_r[s] without its e-th row
    drop = np.array([[prev_index[s[:e] + s[e + 1:]] for e in range(r)] for s in sub_r], int)
    done = 0
    while done < trials:
        T = min(chunk, trials - done)
        W = dist.sample(rng, (T, n, m))
        E = rng.exponential(1.0, (T, r))
        _, val_r = best_per_rowset(W, r)
        _, val_prev = best_per_rowset(W, r - 1)
        top = val_r.argmax(axis=1)
        x_r = val_r[np.arange(T), top]
        x_prev = val_prev.max(axis=1)
        # X_i^{r-1} for each agent i of the optimum: best (r-1)-matching on the others
        avoid = val_prev[np.arange(T)[:, None], drop[top]]
        z = np.zeros(T)
        for li, lam in enumerate(rates):
            joined = (1.0 - E / lam + avoid).max(axis=1) > x_r
            hits[li] += joined.sum()
            z += coef[li] * joined / lam
        d = r * (1.0 - (x_r - x_prev))
        direct = (1.0 - x_r[:, None] + avoid).sum(axis=1)
        z_mom.add(z)
        d_mom.add(d)
        g_mom.add(z - d)
        h_mom.add(direct)
        dd_mom.add(z - direct)
        done += T

    rows = []
    for li, lam in enumerate(rates):
        p = hits[li] / trials
        rows.append(ProbeRow(lam, float(p / lam), math.sqrt(p * (1 - p) / trials) / lam))
    ext, ext_se = z_mom.mean_se()
    rhs, rhs_se = d_mom.mean_se()
    gap, gap_se = g_mom.mean_se()
    direct, _ = h_mom.mean_se()
    dgap, dgap_se = dd_mom.mean_se()
    exact = 0.5 if (n == m == r == 1 and isinstance(dist, Uniform01)) else None
    return ProbeResult(n, m, r, trials, rows, ext, ext_se, rhs, rhs_se, gap, gap_se,
                       direct, dgap, dgap_se, exact)


# ---------------------------------------------------------------- heavy edges

@dataclass
class HeavyEdgeRow:
    n_p: int
    m: int
    trials: int
    q01: float
    median: float
    c_hat: float   # n_p (1 - q01) / (log n_p)^2, undefined for n_p = 1

    def to_json(self) -> dict:
        return asdict(self)


def min_matched_edge(weights: np.ndarray) -> float:
    """Smallest edge weight over the nested maximum-weight matchings of every size."""
    size = min(weights.shape)
    paths, _ = ssp_trace(weights, size)
    best = np.inf
    mate: dict[int, int] = {}
    for path in paths:
        for a, j in zip(path.agents, path.items):
            mate[a] = j
        best = min(best, min(weights[a, j] for a, j in mate.items()))
    return float(best)


def heavy_edge_statistics(class_sizes_list: Sequence[tuple[int, ...]], m_rule, trials: int,
                          seed: int = 0, dist: DistributionSpec = Uniform01(),
                          p: int = 0) -> list[HeavyEdgeRow]:
    """Lower tail of the lightest edge in class ``p``'s own nested matchings under round-robin."""
    rows = []
    for sizes in class_sizes_list:
        sizes = tuple(sizes)
        env = {"k": len(sizes), "n_p": sizes[p], "max_n": max(sizes), "n": sum(sizes)}
        m = _resolve_rule(m_rule, env)
        mins = np.zeros(trials)
        for t in range(trials):
            inst = Instance(sizes, sample_utilities(dist, sum(sizes), m, Seed(seed, t)))
            matching, _ = round_robin(inst)
            bundle = sorted(matching.bundle(inst, p))
            w = inst.utilities[np.ix_(inst.class_agents(p), bundle)]
            mins[t] = min_matched_edge(w) if bundle else np.nan
        q01 = float(np.nanquantile(mins, 0.01))
        med = float(np.nanmedian(mins))
        n_p = sizes[p]
        c_hat = n_p * (1 - q01) / math.log(n_p) ** 2 if n_p > 1 else float("nan")
        rows.append(HeavyEdgeRow(n_p, m, trials, q01, med, c_hat))
    return rows


# ---------------------------------------------------------------- random assignment

@dataclass
class RandAssignResult:
    n: int
    m: int
    r: int
    rate: float
    trials: int
    mean: float
    se: float
    paper_inline: float
    coppersmith_sorkin: float

    @property
    def z_scores(self) -> dict[str, float]:
        return {"paper_inline": (self.mean - self.paper_inline) / self.se,
                "coppersmith_sorkin": (self.mean - self.coppersmith_sorkin) / self.se}

    @property
    def matches(self) -> list[str]:
        """Formula variants within three standard errors of the estimate."""
        return [k for k, z in self.z_scores.items() if abs(z) <= 3]

    def to_json(self) -> dict:
        d = asdict(self)
        d["z_scores"] = self.z_scores
        d["matches"] = self.matches
        return d


def rand_assign_estimator(n: int, m: int, r: int, rate: float = 1.0, trials: int = 10_000,
                          seed: int = 0, chunk: int = 50_000) -> RandAssignResult:
    """Monte Carlo mean of the minimum total weight of an ``r``-edge matching, Exp(rate) edges."""
    if r < 0 or r > min(n, m):
        raise ValueError(f"need 0 <= r <= min(n, m), got r={r}, n={n}, m={m}")
    law = Exponential(rate)
    rng = Seed(seed, 0).generator()
    n_match = math.comb(n, r) * math.perm(m, r)
    vals = []
    done = 0
    while done < trials:
        T = min(chunk, trials - done)
        W = law.sample(rng, (T, n, m))
        if n_match <= 5000:
            vals.append(-batch_max_matching(-W, r))
        else:
            vals.append(np.array([-max_weight_of_size_matrix(-w, r) for w in W]))
        done += T
    x = np.concatenate(vals)
    mu, se = mean_se(x)
    # both closed forms assume unit rate; weights scale as 1 / rate
    return RandAssignResult(
        n, m, r, rate, trials, mu, se,
        bounds.random_assignment_expectation(n, m, r, "paper_inline") / rate,
        bounds.random_assignment_expectation(n, m, r, "coppersmith_sorkin") / rate)


# ---------------------------------------------------------------- nesting

def size_r_optimum(weights: np.ndarray, r: int) -> tuple[float, set[int], set[int]]:
    """Best exactly-``r``-edge matching via one padded assignment solve.

    Returns its weight and the matched row and column sets.
    """
    n, m = weights.shape
    big = 1e6 * (1 + np.abs(weights).max())
    N = n + m - r
    A = np.zeros((N, N))
    A[:n, :m] = weights
    A[n:, m:] = -big  # dummy rows may only absorb items, dummy columns only agents
    rows, cols = linear_sum_assignment(A, maximize=True)
    used_r = {int(i) for i, j in zip(rows, cols) if i < n and j < m}
    used_c = {int(j) for i, j in zip(rows, cols) if i < n and j < m}
    val = float(sum(weights[i, j] for i, j in zip(rows, cols) if i < n and j < m))
    return val, used_r, used_c


def nesting_violations(weights: np.ndarray) -> int:
    """Count sizes ``r`` where the optimal ``r-1`` vertex set is not inside the optimal ``r`` set."""
    bad = 0
    prev_r, prev_c = set(), set()
    for r in range(1, min(weights.shape) + 1):
        _, rs, cs = size_r_optimum(weights, r)
        if not (prev_r <= rs and prev_c <= cs):
            bad += 1
        prev_r, prev_c = rs, cs
    return bad


# ---------------------------------------------------------------- exhaustive small instances

def compositions(n: int, min_parts: int = 2):
    """Ordered class-size vectors summing to ``n`` with at least ``min_parts`` classes."""
    for k in range(min_parts, n + 1):
        for c in itertools.product(range(1, n + 1), repeat=k):
            if sum(c) == n:
                yield c


def grid_instances(levels: Sequence[float], n: int, m: int, min_classes: int = 2):
    """Every instance with ``n`` agents, ``m`` items and utilities in ``levels``.

    Items are interchangeable up to relabelling, so each multiset of utility
    columns is produced once, in sorted column order.
    """
    columns = list(itertools.product(levels, repeat=n))
    for combo in itertools.combinations_with_replacement(range(len(columns)), m):
        u = np.array([columns[c] for c in combo], float).T
        for sizes in compositions(n, min_classes):
            yield Instance(sizes, u)
