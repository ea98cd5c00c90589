"""Fairness and efficiency predicates on a matching.

Envy always needs a gap larger than ``tol``; exact ties never count as envy.
Failed predicates carry the lexicographically first witness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .core_graph import DEFAULT_TOL, ClassMatcher, Instance, Matching, assignment_valuation


@dataclass(frozen=True)
class PairEnvy:
    utility: float      # u_p(M)
    value_of_other: float  # v_p(M(N_q))
    envies: bool

    def to_json(self) -> dict:
        return {"utility": self.utility, "value_of_other": self.value_of_other,
                "envies": self.envies}


@dataclass
class AuditReport:
    pairwise_envy: list[list[PairEnvy | None]]
    verdicts: dict[str, bool] = field(default_factory=dict)
    witnesses: dict[str, dict] = field(default_factory=dict)
    alpha: float | None = None

    def to_json(self) -> dict:
        return {
            "pairwise_envy": [[None if e is None else e.to_json() for e in row]
                              for row in self.pairwise_envy],
            "verdicts": dict(self.verdicts),
            "alpha": self.alpha,
            "witnesses": dict(self.witnesses),
        }


class _Auditor:
    def __init__(self, instance: Instance, matching: Matching, tol: float):
        matching.validate_for(instance)
        self.instance = instance
        self.matching = matching
        self.tol = tol
        self.k = instance.num_classes
        self.bundles = [matching.bundle(instance, p) for p in range(self.k)]
        self.utility = [matching.class_utility(instance, p) for p in range(self.k)]

    def value(self, p: int, items) -> float:
        return assignment_valuation(self.instance, p, items)

    @cached_property
    def pairwise(self) -> list[list[PairEnvy | None]]:
        rows = []
        for p in range(self.k):
            row = []
            for q in range(self.k):
                if p == q:
                    row.append(None)
                    continue
                other = self.value(p, self.bundles[q])
                row.append(PairEnvy(self.utility[p], other, self.utility[p] < other - self.tol))
            rows.append(row)
        return rows

    def envious_pairs(self):
        for p in range(self.k):
            for q in range(self.k):
                if p != q and self.pairwise[p][q].envies:
                    yield p, q

    def report(self) -> AuditReport:
        return AuditReport(self.pairwise)

    def class_ef(self, rep: AuditReport) -> bool:
        for p, q in self.envious_pairs():
            rep.verdicts["class_ef"] = False
            rep.witnesses["class_ef"] = {"p": p, "q": q, "item": None}
            return False
        rep.verdicts["class_ef"] = True
        return True

    def cef1(self, rep: AuditReport, alpha: float) -> bool:
        if not 0 < alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
        rep.alpha = alpha
        for p, q in self.envious_pairs():
            lhs = self.utility[p] / alpha
            best_item, best_rest = None, np.inf
            for j in sorted(self.bundles[q]):
                rest = self.value(p, self.bundles[q] - {j})
                if rest < best_rest:
                    best_item, best_rest = j, rest
            if not lhs >= best_rest - self.tol:
                rep.verdicts["cef1"] = False
                rep.witnesses["cef1"] = {"p": p, "q": q, "item": best_item}
                return False
        rep.verdicts["cef1"] = True
        return True

    def mcef1(self, rep: AuditReport) -> bool:
        for p, q in self.envious_pairs():
            u = self.utility[p]
            union = self.bundles[p] | self.bundles[q]
            best_item, best_rest = None, np.inf
            for j in sorted(self.bundles[q]):
                rest = self.value(p, union - {j})
                if rest < best_rest:
                    best_item, best_rest = j, rest
            if not u >= best_rest - u - self.tol:
                rep.verdicts["mcef1"] = False
                rep.witnesses["mcef1"] = {"p": p, "q": q, "item": best_item}
                return False
        rep.verdicts["mcef1"] = True
        return True

    def non_wasteful(self, rep: AuditReport) -> bool:
        inst = self.instance
        m = inst.num_items
        owner = np.full(m, -1)
        for q, b in enumerate(self.bundles):
            owner[list(b)] = q
        matchers = [ClassMatcher.for_bundle(inst.utilities[inst.class_agents(p)],
                                            self.bundles[p], self.tol) for p in range(self.k)]
        # gain[p, j]: marginal value of item j to class p (0 for its own items)
        gain = np.zeros((self.k, m))
        for p in range(self.k):
            cands = [j for j in range(m) if owner[j] != p]
            if cands:
                gain[p, cands] = matchers[p].gains(cands)[0]
        losses: dict[int, dict[int, float]] = {}
        for j in range(m):
            wanting = [p for p in range(self.k) if gain[p, j] > self.tol]
            if not wanting:
                continue
            q = int(owner[j])
            if q < 0:
                rep.verdicts["non_wasteful"] = False
                rep.witnesses["non_wasteful"] = {"p": wanting[0], "q": None, "item": j,
                                                 "condition": "a"}
                return False
            if q not in losses:
                losses[q] = matchers[q].removal_losses(self.bundles[q])
            if losses[q][j] <= self.tol:
                rep.verdicts["non_wasteful"] = False
                rep.witnesses["non_wasteful"] = {"p": wanting[0], "q": q, "item": j,
                                                 "condition": "b"}
                return False
        rep.verdicts["non_wasteful"] = True
        return True

    def per_agent_ef(self, rep: AuditReport) -> bool:
        n = self.instance.num_agents
        item_of = np.full(n, -1)
        for a, j in self.matching.pairs:
            item_of[a] = j
        if np.any(item_of < 0):
            raise ValueError("per-agent envy-freeness needs every agent to hold an item")
        u = self.instance.utilities
        own = u[np.arange(n), item_of]
        others = u[:, item_of]  # others[i, i'] = u_i(item of i')
        bad = np.argwhere(others > own[:, None] + self.tol)
        if len(bad):
            i, i2 = (int(x) for x in bad[0])
            rep.verdicts["per_agent_ef"] = False
            rep.witnesses["per_agent_ef"] = {"agent": i, "envied": i2, "item": int(item_of[i2])}
            return False
        rep.verdicts["per_agent_ef"] = True
        return True


def check_class_envy_free(instance: Instance, matching: Matching,
                          tol: float = DEFAULT_TOL) -> tuple[bool, AuditReport]:
    aud = _Auditor(instance, matching, tol)
    rep = aud.report()
    return aud.class_ef(rep), rep


def check_cef1(instance: Instance, matching: Matching, alpha: float = 1.0,
               tol: float = DEFAULT_TOL) -> tuple[bool, AuditReport]:
    """Envy removable by dropping one item from the envied bundle, up to factor ``alpha``."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    aud = _Auditor(instance, matching, tol)
    rep = aud.report()
    return aud.cef1(rep, alpha), rep


def check_mcef1(instance: Instance, matching: Matching,
                tol: float = DEFAULT_TOL) -> tuple[bool, AuditReport]:
    aud = _Auditor(instance, matching, tol)
    rep = aud.report()
    return aud.mcef1(rep), rep


def check_non_wasteful(instance: Instance, matching: Matching,
                       tol: float = DEFAULT_TOL) -> tuple[bool, AuditReport]:
    """No item is wasted.

    An item is wasted if it is unallocated and some class gains from it, or if
    its holder loses nothing by giving it up while another class gains from it.
    """
    aud = _Auditor(instance, matching, tol)
    rep = aud.report()
    return aud.non_wasteful(rep), rep


def check_per_agent_envy_free(instance: Instance, matching: Matching,
                              tol: float = DEFAULT_TOL) -> bool:
    aud = _Auditor(instance, matching, tol)
    return aud.per_agent_ef(aud.report())


PREDICATES = ("class_ef", "cef1", "mcef1", "non_wasteful", "per_agent_ef")


def audit(instance: Instance, matching: Matching, alpha: float = 0.5,
          predicates=("class_ef", "cef1", "mcef1", "non_wasteful"),
          tol: float = DEFAULT_TOL) -> AuditReport:
    """Evaluate several predicates at once, sharing the pairwise envy table."""
    aud = _Auditor(instance, matching, tol)
    rep = aud.report()
    for name in predicates:
        if name == "class_ef":
            aud.class_ef(rep)
        elif name == "cef1":
            aud.cef1(rep, alpha)
        elif name == "mcef1":
            aud.mcef1(rep)
        elif name == "non_wasteful":
            aud.non_wasteful(rep)
        elif name == "per_agent_ef":
            aud.per_agent_ef(rep)
        else:
            raise ValueError(f"unknown predicate {name!r}")
    return rep
