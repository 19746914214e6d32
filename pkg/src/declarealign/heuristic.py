"""Admissible estimate of the remaining alignment cost of a graph state.

Every violated activation must be resolved by (a refinement of) one of its
proposed actions.  The estimate is the cheapest way to pick one action per
activation when actions are allowed to share work: a removed cell is paid
once, and an insertion can serve several actions whose choice sets overlap.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .evaluator import GraphActivation, View, all_violations
from .ltgraph import LTGraph
from .model import Model
from .repair import UNIT_COSTS, Action, CostFunction, propose_actions

MAX_EXPANSIONS = 10_000

Bag = tuple  # sorted tuple of (choices, cost) insertion slots


@dataclass
class Estimate:
    value: float
    proposals: dict[tuple, list[Action]]
    violated: list[GraphActivation]
    exact: bool = True  # False when the search cap forced the fallback bound


def _embed(bag: Bag, items: Sequence[tuple[frozenset, float]]) -> Iterable[Bag]:
    """All ways to place ``items`` into ``bag``, each slot used at most once.

    A slot absorbs an item when their choices overlap and keeps the
    intersection.  Unplaced items open new slots.
    """
    if not items:
        yield bag
        return
    item, rest = items[0], items[1:]
    for b in _embed(bag, rest):
        yield _sorted(b + (item,))
    seen = set()
    for i, (c, k) in enumerate(bag):
        common = c & item[0]
        if not common or (c, k) in seen:
            continue
        seen.add((c, k))
        for b in _embed(bag[:i] + bag[i + 1 :], rest):
            yield _sorted(b + ((common, k),))


def _sorted(bag) -> Bag:
    return tuple(sorted(bag, key=_slot_key))


def _slot_key(slot):
    return (tuple(sorted(slot[0])), slot[1])


def bag_cost(bag: Bag) -> float:
    return sum(k for _, k in bag)


def merge_actions(a: Action, b: Action, g: LTGraph | None = None, cf: CostFunction = UNIT_COSTS):
    """Cheapest combined cost-bearing content of two actions.

    Returns ``(removed, bag, cost)`` when the actions share a removal or an
    overlapping insertion, otherwise ``None``.
    """
    shares_removal = bool(a.removed & b.removed)
    overlaps = any(not x.isdisjoint(y) for x, _ in a.inserted for y, _ in b.inserted)
    if a.signature != b.signature and not (shares_removal or overlaps):
        return None
    removed = a.removed | b.removed
    removal_cost = _removal_cost(removed, g, cf, (a, b))
    base = _sorted(a.inserted)
    best = min(_embed(base, list(b.inserted)), key=bag_cost)
    return removed, best, removal_cost + bag_cost(best)


def _removal_cost(removed, g, cf, actions) -> float:
    if g is None:
        # fall back to the costs booked on the actions themselves
        per = {}
        for act in actions:
            share = (act.cost - bag_cost(tuple(act.inserted))) / max(1, len(act.removed))
            for u in act.removed:
                per[u] = share
        return sum(per[u] for u in removed)
    cells = {c.uid: c for _, _, c in g.cells}
    return sum(cf.log(next(iter(cells[u].choices))) for u in removed)


def _min_cover(
    groups: Sequence[Sequence[Action]], log_cost: Mapping[int, float], cap: int
) -> tuple[float, bool]:
    """Dijkstra over one-action-per-group choices; returns (cost, finished)."""
    n = len(groups)
    start = (0, frozenset(), ())
    heap = [(0.0, 0, start)]
    best = {start: 0.0}
    tie = itertools.count(1)
    expansions = 0
    while heap:
        cost, _, state = heapq.heappop(heap)
        if best.get(state, math.inf) < cost:
            continue
        i, removed, bag = state
        if i == n:
            return cost, True
        expansions += 1
        if expansions > cap:
            return math.nan, False
        for act in groups[i]:
            rem = removed | act.removed
            rcost = sum(log_cost[u] for u in rem)
            for nb in _embed(bag, list(act.inserted)):
                nxt = (i + 1, rem, nb)
                c = rcost + bag_cost(nb)
                if c < best.get(nxt, math.inf):
                    best[nxt] = c
                    heapq.heappush(heap, (c, next(tie), nxt))
    return math.inf, True


def estimate(
    g: LTGraph,
    m: Model,
    cf: CostFunction = UNIT_COSTS,
    *,
    alphabet: Iterable[str] | None = None,
    feasible_only: bool = True,
    max_expansions: int = MAX_EXPANSIONS,
) -> Estimate:
    """Compute violated activations, their proposals and the heuristic value."""
    view = View(g)
    alphabet = frozenset(alphabet) if alphabet is not None else m.alphabet
    violated = all_violations(view, m)
    proposals = {
        a.key: propose_actions(g, a, cf, alphabet=alphabet, view=view, feasible_only=feasible_only)
        for a in violated
    }
    value, exact = bound(g, proposals, cf, max_expansions)
    return Estimate(value, proposals, violated, exact)


def bound(
    g: LTGraph, proposals: Mapping[tuple, Sequence[Action]], cf: CostFunction, max_expansions: int = MAX_EXPANSIONS
) -> tuple[float, bool]:
    groups = []
    for acts in proposals.values():
        usable = list(acts)
        if not usable:
            return math.inf, True
        if any(not a.removed and not a.inserted for a in usable):
            continue  # a free repair exists; this activation adds nothing
        groups.append(usable)
    if not groups:
        return 0.0, True
    groups.sort(key=len)
    log_cost = {c.uid: cf.log(next(iter(c.choices))) for _, _, c in g.cells if not c.inserted}
    value, done = _min_cover(groups, log_cost, max_expansions)
    if done:
        return value, True
    return max(min(a.cost for a in acts) for acts in groups), False


def heuristic(g: LTGraph, m: Model, cf: CostFunction = UNIT_COSTS, **kw) -> float:
    return estimate(g, m, cf, **kw).value
