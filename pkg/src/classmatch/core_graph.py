"""Complete weighted bipartite graphs between agents and items.

Agents are partitioned into classes; a class values a bundle of items by the
best matching between its members and that bundle (an assignment valuation).
Matchings of a fixed size are grown by successive maximum-gain augmenting
paths, which is what the round-robin analysis reasons about.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

DEFAULT_TOL = 1e-9


class InfeasibleSizeError(ValueError):
    """Requested matching size exceeds what the subgraph can hold."""


@dataclass(frozen=True)
class Instance:
    class_sizes: tuple[int, ...]
    utilities: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.class_sizes)
        u = np.array(self.utilities, dtype=float)
        if u.ndim != 2:
            raise ValueError("utilities must be a 2-d matrix")
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError("every class needs at least one agent")
        if sum(sizes) != u.shape[0]:
            raise ValueError(
                f"class sizes sum to {sum(sizes)} but there are {u.shape[0]} agents")
        if u.shape[1] < 1:
            raise ValueError("need at least one item")
        if not np.all(np.isfinite(u)) or np.any(u < 0):
            raise ValueError("utilities must be finite and non-negative")
        u.setflags(write=False)
        object.__setattr__(self, "class_sizes", sizes)
        object.__setattr__(self, "utilities", u)

    @property
    def num_agents(self) -> int:
        return self.utilities.shape[0]

    @property
    def num_items(self) -> int:
        return self.utilities.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.class_sizes)

    def class_agents(self, p: int) -> list[int]:
        start = sum(self.class_sizes[:p])
        return list(range(start, start + self.class_sizes[p]))

    def class_of(self, agent: int) -> int:
        acc = 0
        for p, size in enumerate(self.class_sizes):
            acc += size
            if agent < acc:
                return p
        raise IndexError(agent)

    def to_dict(self) -> dict:
        return {"class_sizes": list(self.class_sizes),
                "utilities": self.utilities.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        return cls(tuple(data["class_sizes"]), np.asarray(data["utilities"], dtype=float))

    @classmethod
    def load(cls, path) -> "Instance":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Matching:
    """A set of (agent, item) pairs, kept sorted by agent."""

    pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        pairs = tuple(sorted((int(a), int(j)) for a, j in self.pairs))
        agents = [a for a, _ in pairs]
        items = [j for _, j in pairs]
        if len(set(agents)) != len(agents):
            raise ValueError("an agent appears in more than one pair")
        if len(set(items)) != len(items):
            raise ValueError("an item appears in more than one pair")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def agents(self) -> set[int]:
        return {a for a, _ in self.pairs}

    @property
    def items(self) -> set[int]:
        return {j for _, j in self.pairs}

    def item_of(self, agent: int) -> int | None:
        for a, j in self.pairs:
            if a == agent:
                return j
        return None

    def weight(self, utilities: np.ndarray) -> float:
        return float(sum(utilities[a, j] for a, j in self.pairs))

    def bundle(self, instance: Instance, p: int) -> set[int]:
        """Items matched to agents of class ``p``."""
        members = set(instance.class_agents(p))
        return {j for a, j in self.pairs if a in members}

    def class_utility(self, instance: Instance, p: int) -> float:
        members = set(instance.class_agents(p))
        return float(sum(instance.utilities[a, j] for a, j in self.pairs if a in members))

    def validate_for(self, instance: Instance) -> None:
        for a, j in self.pairs:
            if not (0 <= a < instance.num_agents and 0 <= j < instance.num_items):
                raise ValueError(f"pair ({a}, {j}) is out of range for the instance")

    def to_json(self) -> list[list[int]]:
        return [[a, j] for a, j in self.pairs]

    @classmethod
    def from_json(cls, data: Sequence[Sequence[int]]) -> "Matching":
        return cls(tuple((int(a), int(j)) for a, j in data))


@dataclass(frozen=True)
class AugmentingPath:
    """Alternating path ``agents[0] -> items[0] -> agents[1] -> ... -> items[-1]``.

    Applying it matches ``agents[s]`` to ``items[s]`` for every ``s``; each
    ``items[s]`` with ``s < len - 1`` was previously held by ``agents[s + 1]``.
    ``agents[0]`` was free before the step. ``items[-1]`` was free as well,
    unless ``released`` names an item the last agent gives up.
    """

    agents: tuple[int, ...]
    items: tuple[int, ...]
    gain: float
    released: int | None = None

    def edges_added(self) -> list[tuple[int, int]]:
        return list(zip(self.agents, self.items))

    def to_json(self) -> dict:
        return {"agents": list(self.agents), "items": list(self.items),
                "gain": self.gain, "released": self.released}


def apply_path(pairs: dict[int, int], path: AugmentingPath) -> dict[int, int]:
    """Apply ``path`` to an agent -> item map, returning the new map."""
    out = dict(pairs)
    for a, j in zip(path.agents, path.items):
        out[a] = j
    if path.released is not None:
        holder = [a for a, j in out.items() if j == path.released]
        for a in holder:
            del out[a]
    return out


def ssp_trace(weights: np.ndarray, r: int) -> tuple[list[AugmentingPath], dict[int, int]]:
    """Successive shortest paths on negated weights, stopping after ``r`` steps.

    Dense Dijkstra with node potentials; returns the augmenting paths in
    local (row, col) indices and the final row -> col map.
    """
    n, m = weights.shape
    cost = -weights
    # potentials: rows start at 0, columns at their cheapest incoming arc
    pot_row = np.zeros(n)
    pot_col = cost.min(axis=0) if n else np.zeros(m)
    pot_sink = pot_col.min() if m else 0.0
    row_mate = np.full(n, -1)
    col_mate = np.full(m, -1)
    paths = []
    for _ in range(r):
        inf = np.inf
        dist_row = np.full(n, inf)
        dist_col = np.full(m, inf)
        prev_col = np.full(m, -1)  # row that reached this column
        free_rows = row_mate < 0
        dist_row[free_rows] = -pot_row[free_rows]
        done_row = np.zeros(n, bool)
        done_col = np.zeros(m, bool)
        dist_sink = inf
        sink_col = -1
        while True:
            cand_r = np.where(done_row, inf, dist_row)
            cand_c = np.where(done_col, inf, dist_col)
            ir = int(np.argmin(cand_r))
            ic = int(np.argmin(cand_c))
            best_r, best_c = cand_r[ir], cand_c[ic]
            if min(best_r, best_c) >= dist_sink:
                break
            if best_r <= best_c:
                done_row[ir] = True
                red = cost[ir] + pot_row[ir] - pot_col
                new = best_r + red
                better = (new < dist_col - 1e-15) & ~done_col
                dist_col[better] = new[better]
                prev_col[better] = ir
            else:
                done_col[ic] = True
                mate = col_mate[ic]
                if mate < 0:
                    d = best_c + pot_col[ic] - pot_sink
                    if d < dist_sink:
                        dist_sink = d
                        sink_col = ic
                elif not done_row[mate]:
                    d = best_c - cost[mate, ic] + pot_col[ic] - pot_row[mate]
                    if d < dist_row[mate] - 1e-15:
                        dist_row[mate] = d
        if sink_col < 0:
            raise InfeasibleSizeError("no augmenting path left")
        # reduced costs stay non-negative with distances capped at the sink distance
        pot_row += np.minimum(dist_row, dist_sink)
        pot_col += np.minimum(dist_col, dist_sink)
        pot_sink += dist_sink

        cols = []
        rows = []
        c = sink_col
        while True:
            row = prev_col[c]
            cols.append(c)
            rows.append(row)
            old = row_mate[row]
            if old < 0:
                break
            c = old
        rows.reverse()
        cols.reverse()
        gain = 0.0
        for row, col in zip(rows, cols):
            old = row_mate[row]
            if old >= 0:
                gain -= weights[row, old]
            gain += weights[row, col]
        for row, col in zip(rows, cols):
            row_mate[row] = col
            col_mate[col] = row
        paths.append(AugmentingPath(tuple(int(x) for x in rows),
                                    tuple(int(x) for x in cols), float(gain)))
    final = {int(i): int(row_mate[i]) for i in range(n) if row_mate[i] >= 0}
    return paths, final


def _subgraph(instance: Instance, left_subset: Iterable[int], right_subset: Iterable[int]):
    left = sorted(set(left_subset))
    right = sorted(set(right_subset))
    for a in left:
        if not 0 <= a < instance.num_agents:
            raise IndexError(f"agent {a} out of range")
    for j in right:
        if not 0 <= j < instance.num_items:
            raise IndexError(f"item {j} out of range")
    return left, right, instance.utilities[np.ix_(left, right)]


def augmenting_path_trace(instance: Instance, left_subset, right_subset,
                          r: int) -> list[AugmentingPath]:
    """Augmenting paths, in global indices, that build the size-``r`` matching."""
    left, right, w = _subgraph(instance, left_subset, right_subset)
    if r < 0 or r > min(len(left), len(right)):
        raise InfeasibleSizeError(
            f"size {r} infeasible for a {len(left)}x{len(right)} subgraph")
    paths, _ = ssp_trace(w, r)
    return [AugmentingPath(tuple(left[a] for a in p.agents),
                           tuple(right[j] for j in p.items), p.gain) for p in paths]


def max_weight_matching_of_size(instance: Instance, left_subset, right_subset,
                                r: int) -> Matching:
    """Maximum-weight matching with exactly ``r`` edges between the two subsets."""
    pairs: dict[int, int] = {}
    for path in augmenting_path_trace(instance, left_subset, right_subset, r):
        pairs = apply_path(pairs, path)
    return Matching(tuple(pairs.items()))


def max_weight_of_size_matrix(weights: np.ndarray, r: int) -> float:
    """Weight of the best size-``r`` matching in a raw (possibly signed) matrix."""
    weights = np.asarray(weights, dtype=float)
    if r < 0 or r > min(weights.shape):
        raise InfeasibleSizeError(f"size {r} infeasible for shape {weights.shape}")
    _, final = ssp_trace(weights, r)
    return float(sum(weights[i, j] for i, j in final.items()))


def assignment_valuation(instance: Instance, p: int, bundle: Iterable[int]) -> float:
    """Value class ``p`` assigns to ``bundle``: its best internal matching weight."""
    bundle = sorted(set(bundle))
    if not bundle:
        return 0.0
    agents = instance.class_agents(p)
    w = instance.utilities[np.ix_(agents, bundle)]
    rows, cols = linear_sum_assignment(w, maximize=True)
    return float(w[rows, cols].sum())


def marginal_gain(instance: Instance, p: int, current_bundle: Iterable[int], j: int) -> float:
    current = set(current_bundle)
    if j in current:
        raise ValueError(f"item {j} already in the bundle")
    return (assignment_valuation(instance, p, current | {j})
            - assignment_valuation(instance, p, current))


class ClassMatcher:
    """Optimal matching between one class and its bundle, updated one item at a time.

    Works in local agent indices ``0..n_p-1`` over the class's rows of the
    utility matrix. The held matching must be optimal among all matchings on
    the held items, which every update preserves.
    """

    def __init__(self, weights: np.ndarray, tol: float = DEFAULT_TOL):
        self.weights = np.asarray(weights, dtype=float)
        self.tol = tol
        self.n_agents = self.weights.shape[0]
        self.item_of = np.full(self.n_agents, -1)

    @classmethod
    def for_bundle(cls, weights: np.ndarray, bundle: Iterable[int],
                   tol: float = DEFAULT_TOL) -> "ClassMatcher":
        cm = cls(weights, tol)
        bundle = sorted(set(bundle))
        if bundle:
            rows, cols = linear_sum_assignment(cm.weights[:, bundle], maximize=True)
            for a, c in zip(rows, cols):
                cm.item_of[a] = bundle[c]
        return cm

    @property
    def value(self) -> float:
        held = self.item_of >= 0
        return float(self.weights[np.nonzero(held)[0], self.item_of[held]].sum())

    def held_items(self) -> set[int]:
        return {int(j) for j in self.item_of if j >= 0}

    def _continuations(self):
        """Best value of an alternating chain starting at each agent that just gained an item.

        A free agent ends the chain (0). A matched agent gives up its item, which
        is either dropped or handed to another agent who continues the chain.
        """
        n = self.n_agents
        held = self.item_of >= 0
        held_w = np.zeros(n)
        held_w[held] = self.weights[np.nonzero(held)[0], self.item_of[held]]
        g = np.where(held, -held_w, 0.0)
        nxt = np.full(n, -1)
        if not held.any():
            return g, nxt
        matched = np.nonzero(held)[0]
        # pass[a', a] = weight agent a' puts on the item agent a holds
        pass_w = self.weights[:, self.item_of[matched]]
        for _ in range(n + 1):
            cand = pass_w + g[:, None]
            cand[matched, np.arange(len(matched))] = -np.inf
            best_src = np.argmax(cand, axis=0)
            best = cand[best_src, np.arange(len(matched))]
            new = -held_w[matched] + best
            improve = new > g[matched] + 1e-12
            if not improve.any():
                break
            g[matched[improve]] = new[improve]
            nxt[matched[improve]] = best_src[improve]
        else:
            raise RuntimeError("held matching is not optimal: positive alternating cycle")
        return g, nxt

    def gains(self, candidates: Sequence[int]) -> tuple[np.ndarray, np.ndarray, tuple]:
        """Marginal value of each candidate item (not held) added to the bundle."""
        g, nxt = self._continuations()
        if len(candidates) == 0:
            return np.zeros(0), np.zeros(0, int), (g, nxt)
        vals = self.weights[:, list(candidates)] + g[:, None]
        first = np.argmax(vals, axis=0)
        best = vals[first, np.arange(len(candidates))]
        return np.maximum(best, 0.0), first, (g, nxt)

    def add_item(self, j: int, start_agent: int, chains) -> AugmentingPath:
        """Give item ``j`` to ``start_agent`` and follow the best chain; returns the path."""
        g, nxt = chains
        agents = [start_agent]
        items = [j]
        released = None
        gain = self.weights[start_agent, j]
        a = start_agent
        seen = {a}
        while self.item_of[a] >= 0:
            old = int(self.item_of[a])
            gain -= self.weights[a, old]
            b = int(nxt[a])
            if b < 0:
                released = old
                break
            if b in seen:
                raise RuntimeError("alternating chain revisits an agent")
            seen.add(b)
            agents.append(b)
            items.append(old)
            gain += self.weights[b, old]
            a = b
        for a, it in zip(agents, items):
            self.item_of[a] = it
        return AugmentingPath(tuple(agents), tuple(items), float(gain), released)

    def removal_losses(self, bundle: Iterable[int] | None = None) -> dict[int, float]:
        """``v(B) - v(B minus {j})`` for every ``j`` in ``B`` (default: the held items)."""
        bundle = sorted(self.held_items() if bundle is None else set(bundle))
        base = self.value
        out = {}
        for j in bundle:
            rest = [x for x in bundle if x != j]
            if rest:
                w = self.weights[:, rest]
                rows, cols = linear_sum_assignment(w, maximize=True)
                out[j] = base - float(w[rows, cols].sum())
            else:
                out[j] = base
        return out


def marginal_gains(instance: Instance, p: int, bundle: Iterable[int],
                   candidates: Sequence[int]) -> np.ndarray:
    """Vectorised ``marginal_gain`` for many candidate items at once."""
    bundle = set(bundle)
    if bundle & set(candidates):
        raise ValueError("candidates must lie outside the bundle")
    agents = instance.class_agents(p)
    cm = ClassMatcher.for_bundle(instance.utilities[agents], bundle)
    gains, _, _ = cm.gains(list(candidates))
    return gains


def favorite_bundle(instance: Instance, p: int, r: int) -> set[int]:
    """Size-``r`` bundle of maximum value to class ``p``, built greedily by marginal value."""
    m = instance.num_items
    if r < 0 or r > m:
        raise InfeasibleSizeError(f"bundle size {r} infeasible with {m} items")
    agents = instance.class_agents(p)
    cm = ClassMatcher(instance.utilities[agents])
    bundle: set[int] = set()
    while len(bundle) < r:
        cands = [j for j in range(m) if j not in bundle]
        gains, first, chains = cm.gains(cands)
        best = int(np.argmax(gains))
        j = cands[best]
        # zero-gain items and released items stay in the bundle, just unmatched
        if gains[best] > 0:
            cm.add_item(j, int(first[best]), chains)
        bundle.add(j)
    return bundle
