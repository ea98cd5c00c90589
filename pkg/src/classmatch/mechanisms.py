"""Matching mechanisms: class round-robin, maximum weight, greedy house allocation, envy graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core_graph import (
    DEFAULT_TOL,
    AugmentingPath,
    apply_path,
    ClassMatcher,
    Instance,
    Matching,
    assignment_valuation,
    max_weight_matching_of_size,
)

MECHANISMS = ("round-robin", "max-weight", "greedy-house", "envy-graph")


class GreedyHouseFailure(RuntimeError):
    """The greedy house allocation discarded too many items to serve every agent."""


@dataclass(frozen=True)
class Pick:
    round: int
    class_index: int
    item: int
    gain: float
    path: AugmentingPath  # global agent / item indices

    def to_json(self) -> dict:
        return {"round": self.round, "class": self.class_index, "item": self.item,
                "gain": self.gain, "path": self.path.to_json()}


@dataclass
class RoundTrace:
    picks: list[Pick] = field(default_factory=list)

    @property
    def num_rounds(self) -> int:
        return max((p.round for p in self.picks), default=0)

    def replay(self) -> Matching:
        pairs: dict[int, int] = {}
        for pick in self.picks:
            pairs = apply_path(pairs, pick.path)
        return Matching(tuple(pairs.items()))

    def to_json(self) -> dict:
        return {"rounds": self.num_rounds, "picks": [p.to_json() for p in self.picks]}


def round_robin(instance: Instance, tol: float = DEFAULT_TOL) -> tuple[Matching, RoundTrace]:
    """Classes take turns, in index order, picking the item of highest marginal value.

    After each pick the class re-optimises its internal matching. An item the
    class lets go during that re-optimisation goes back to the pool. The loop
    stops once no class gains more than ``tol`` from any pooled item.
    """
    k = instance.num_classes
    agents = [instance.class_agents(p) for p in range(k)]
    matchers = [ClassMatcher(instance.utilities[a], tol) for a in agents]
    pool = np.ones(instance.num_items, bool)
    trace = RoundTrace()
    r = 0
    while True:
        r += 1
        took = False
        for p in range(k):
            cands = np.nonzero(pool)[0]
            if len(cands) == 0:
                break
            gains, first, chains = matchers[p].gains(cands)
            best = int(np.argmax(gains))
            if gains[best] <= tol:
                continue
            j = int(cands[best])
            local = matchers[p].add_item(j, int(first[best]), chains)
            pool[j] = False
            if local.released is not None:
                pool[local.released] = True
            glob = AugmentingPath(tuple(agents[p][a] for a in local.agents), local.items,
                                  local.gain, local.released)
            trace.picks.append(Pick(r, p, j, float(gains[best]), glob))
            took = True
        if not took:
            break
    pairs = []
    for p in range(k):
        for a, j in enumerate(matchers[p].item_of):
            if j >= 0:
                pairs.append((agents[p][a], int(j)))
    return Matching(tuple(pairs)), trace


def max_weight_mechanism(instance: Instance) -> Matching:
    """Maximum-weight matching of size ``min(n, m)`` over all agents and items."""
    n, m = instance.utilities.shape
    return max_weight_matching_of_size(instance, range(n), range(m), min(n, m))


def greedy_house_allocation(instance: Instance, collision: str = "repick") -> Matching:
    """Greedy one-item-per-agent allocation with discarding on collisions.

    Unassigned agents are served lowest index first. The served agent names its
    favourite non-discarded item. If somebody already holds it, the item is
    discarded and that holder becomes unassigned again. With ``repick`` the
    served agent chooses again right away; with ``defer`` it rejoins the queue.
    """
    if collision not in ("repick", "defer"):
        raise ValueError(f"collision must be 'repick' or 'defer', got {collision!r}")
    n, m = instance.utilities.shape
    if m < n:
        raise ValueError(f"one item per agent needs m >= n, got m={m}, n={n}")
    u = instance.utilities
    alive = np.ones(m, bool)
    holder = np.full(m, -1)
    item_of = np.full(n, -1)
    while True:
        waiting = np.nonzero(item_of < 0)[0]
        if len(waiting) == 0:
            break
        a = int(waiting[0])
        while True:
            if not alive.any():
                raise GreedyHouseFailure("every item was discarded before all agents were served")
            j = int(np.argmax(np.where(alive, u[a], -np.inf)))
            prev = holder[j]
            if prev < 0:
                holder[j] = a
                item_of[a] = j
                break
            alive[j] = False
            holder[j] = -1
            item_of[prev] = -1
            if collision == "defer":
                break
    return Matching(tuple((int(a), int(j)) for a, j in enumerate(item_of) if j >= 0))


def _find_cycle(envies: np.ndarray) -> list[int] | None:
    """First directed cycle in the envy graph, searching from the lowest-index class."""
    k = len(envies)
    for start in range(k):
        stack = [start]
        on_path = {start: 0}
        iters = [iter(np.nonzero(envies[start])[0])]
        while stack:
            nxt = next(iters[-1], None)
            if nxt is None:
                del on_path[stack.pop()]
                iters.pop()
                continue
            nxt = int(nxt)
            if nxt in on_path:
                return stack[on_path[nxt]:]
            if nxt < start:
                continue
            on_path[nxt] = len(stack)
            stack.append(nxt)
            iters.append(iter(np.nonzero(envies[nxt])[0]))
    return None


def envy_graph_bundles(instance: Instance, tol: float = DEFAULT_TOL) -> list[set[int]]:
    """Allocate every item, in index order, to a class nobody envies; rotate envy cycles."""
    k = instance.num_classes
    bundles: list[set[int]] = [set() for _ in range(k)]

    def envy_matrix():
        own = [assignment_valuation(instance, p, bundles[p]) for p in range(k)]
        env = np.zeros((k, k), bool)
        for p in range(k):
            for q in range(k):
                if p != q and assignment_valuation(instance, p, bundles[q]) > own[p] + tol:
                    env[p, q] = True
        return env

    for j in range(instance.num_items):
        env = envy_matrix()
        while not (sources := np.nonzero(~env.any(axis=0))[0]).size:
            cycle = _find_cycle(env)
            # each class on the cycle takes the bundle of the class it envies
            taken = [bundles[cycle[(i + 1) % len(cycle)]] for i in range(len(cycle))]
            for p, b in zip(cycle, taken):
                bundles[p] = b
            env = envy_matrix()
        bundles[int(sources[0])].add(j)
    return bundles


def bundles_to_matching(instance: Instance, bundles: list[set[int]]) -> Matching:
    """Each class matches its bundle optimally; surplus items stay unmatched."""
    pairs = []
    for p, bundle in enumerate(bundles):
        agents = instance.class_agents(p)
        cm = ClassMatcher.for_bundle(instance.utilities[agents], bundle)
        pairs += [(agents[a], int(j)) for a, j in enumerate(cm.item_of) if j >= 0]
    return Matching(tuple(pairs))


def envy_graph_mechanism(instance: Instance, tol: float = DEFAULT_TOL) -> Matching:
    return bundles_to_matching(instance, envy_graph_bundles(instance, tol))


def run_mechanism(name: str, instance: Instance, **kw) -> Matching:
    if name == "round-robin":
        return round_robin(instance, **kw)[0]
    if name == "max-weight":
        return max_weight_mechanism(instance)
    if name == "greedy-house":
        return greedy_house_allocation(instance, **kw)
    if name == "envy-graph":
        return envy_graph_mechanism(instance, **kw)
    raise ValueError(f"unknown mechanism {name!r}; choose from {', '.join(MECHANISMS)}")
