"""Reference aligners and random instances for testing.

Nothing here touches the graph evaluator or the repair catalogs.  Every rule
of a constraint is tracked by a small finite monitor over the model-side
sequence, and alignments are found by uniform-cost search over
(trace position, monitor states).
"""

from __future__ import annotations

import heapq
import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .aligner import Alignment, Move, alignment_cost
from .ltgraph import FIRST, LAST, LTGraph
from .model import TEMPLATES, Constraint, Model, Part, Trace, satisfies
from .repair import UNIT_COSTS, CostFunction


# ---------------------------------------------------------------------------
# monitors


@dataclass(frozen=True)
class Monitor:
    start: object
    step: Callable[[object, str], object]
    accept: Callable[[object], bool]
    dead: Callable[[object], bool] = lambda s: False


def part_monitor(part: Part) -> Monitor:
    A, T = part.activation, part.target
    kind, scope = part.kind, part.scope

    if kind == "count":
        cap = max(part.lo, part.hi + 1 if part.hi is not None else 0)
        hi = part.hi
        return Monitor(
            0,
            lambda n, x: min(cap, n + (x in T)),
            lambda n: n >= part.lo and (hi is None or n <= hi),
            lambda n: hi is not None and n > hi,
        )
    if kind == "init":  # 0 empty, 1 good start, 2 bad start
        return Monitor(0, lambda s, x: s or (1 if x in T else 2), lambda s: s == 1, lambda s: s == 2)
    if kind == "end":
        return Monitor(False, lambda s, x: x in T, bool)
    if kind == "choice":
        return Monitor(False, lambda s, x: s or x in T, bool)
    if kind == "xchoice":
        return Monitor(
            (False, False),
            lambda s, x: (s[0] or x in A, s[1] or x in T),
            lambda s: s[0] != s[1],
            lambda s: s[0] and s[1],
        )
    if kind in ("exists", "not") and scope == "any":
        # (#targets capped at 2, activation outside targets seen, activation inside targets seen)
        def step(s, x):
            n, out_, in_ = s
            return (min(2, n + (x in T)), out_ or (x in A and x not in T), in_ or (x in A and x in T))

        if kind == "exists":
            return Monitor((0, False, False), step, lambda s: (not s[1] or s[0] >= 1) and (not s[2] or s[0] >= 2))

        def bad(s):
            return (s[1] and s[0] >= 1) or (s[2] and s[0] >= 2)

        return Monitor((0, False, False), step, lambda s: not bad(s), bad)
    if kind == "exists" and scope == "after":  # state: an activation still waits
        return Monitor(False, lambda p, x: x in A or (p and x not in T), lambda p: not p)
    if kind == "exists":  # before: (target seen, violated)
        return Monitor(
            (False, False),
            lambda s, x: (s[0] or x in T, s[1] or (x in A and not s[0])),
            lambda s: not s[1],
            lambda s: s[1],
        )
    if kind == "alt" and scope == "after":  # (pending, violated)

        def step(s, x):
            pending, bad = s
            if pending and x not in T and x in A:
                bad = True
            if pending and x in T:
                pending = False
            return (pending or x in A, bad)

        return Monitor((False, False), step, lambda s: not s[0] and not s[1], lambda s: s[1])
    if kind == "alt":  # before: (last relevant event was a target, violated)

        def step(s, x):
            last_t, bad = s
            if x in A and last_t is not True:
                bad = True
            if x in T:
                last_t = True
            elif x in A:
                last_t = False
            return (last_t, bad)

        return Monitor((None, False), step, lambda s: not s[1], lambda s: s[1])
    if kind == "chain" and scope == "after":  # (previous was activation, violated)
        return Monitor(
            (False, False),
            lambda s, x: (x in A, s[1] or (s[0] and x not in T)),
            lambda s: not s[0] and not s[1],
            lambda s: s[1],
        )
    if kind == "chain":
        return Monitor(
            (False, False),
            lambda s, x: (x in T, s[1] or (x in A and not s[0])),
            lambda s: not s[1],
            lambda s: s[1],
        )
    if kind == "not" and scope == "after":  # (activation seen, violated)
        return Monitor(
            (False, False),
            lambda s, x: (s[0] or x in A, s[1] or (x in T and s[0])),
            lambda s: not s[1],
            lambda s: s[1],
        )
    if kind == "not":
        return Monitor(
            (False, False),
            lambda s, x: (s[0] or x in T, s[1] or (x in A and s[0])),
            lambda s: not s[1],
            lambda s: s[1],
        )
    if kind == "notchain" and scope == "after":
        return Monitor(
            (False, False),
            lambda s, x: (x in A, s[1] or (s[0] and x in T)),
            lambda s: not s[1],
            lambda s: s[1],
        )
    if kind == "notchain":
        return Monitor(
            (False, False),
            lambda s, x: (x in T, s[1] or (x in A and s[0])),
            lambda s: not s[1],
            lambda s: s[1],
        )
    raise ValueError(f"no monitor for {kind}/{scope}")


class ModelMonitor:
    """Product of the monitors of every rule of every constraint."""

    def __init__(self, m: Model):
        self.monitors = [part_monitor(p) for c in m.constraints for p in c.parts]
        self.start = tuple(x.start for x in self.monitors)

    def step(self, state: tuple, x: str) -> tuple:
        return tuple(mon.step(s, x) for mon, s in zip(self.monitors, state))

    def accept(self, state: tuple) -> bool:
        return all(mon.accept(s) for mon, s in zip(self.monitors, state))

    def dead(self, state: tuple) -> bool:
        return any(mon.dead(s) for mon, s in zip(self.monitors, state))

    def run(self, seq: Iterable[str]) -> bool:
        s = self.start
        for x in seq:
            s = self.step(s, x)
        return self.accept(s)


# ---------------------------------------------------------------------------
# brute-force aligners


def brute_force_align(
    t: Trace | Sequence[str], m: Model, max_cost: float, cf: CostFunction = UNIT_COSTS
) -> Alignment | None:
    """Cheapest alignment with cost at most ``max_cost``, or ``None``.

    Uniform-cost search visits total costs in increasing order, so the first
    accepting state reached is optimal; states are (trace position, monitor
    states), which collapses sequences the constraints cannot tell apart.
    """
    trace = tuple(t)
    mon = ModelMonitor(m)
    alphabet = sorted(m.alphabet)
    start = (0, mon.start)
    best = {start: 0.0}
    parent: dict = {start: None}
    tie = itertools.count()
    heap = [(0.0, next(tie), start)]
    while heap:
        cost, _, state = heapq.heappop(heap)
        if cost > best[state]:
            continue
        i, ms = state
        if i == len(trace) and mon.accept(ms):
            moves = []
            while parent[state] is not None:
                state, move = parent[state]
                moves.append(move)
            moves.reverse()
            return Alignment(tuple(moves), alignment_cost(moves, cf))
        succ = []
        if i < len(trace):
            a = trace[i]
            succ.append(((i + 1, ms), cf.log(a), Move("log", a, None)))
            succ.append(((i + 1, mon.step(ms, a)), 0.0, Move("synchronous", a, a)))
        for a in alphabet:
            succ.append(((i, mon.step(ms, a)), cf.model(a), Move("model", None, a)))
        for nxt, c, move in succ:
            total = cost + c
            if total > max_cost + 1e-9 or mon.dead(nxt[1]):
                continue
            if total < best.get(nxt, math.inf):
                best[nxt] = total
                parent[nxt] = (state, move)
                heapq.heappush(heap, (total, next(tie), nxt))
    return None


def _model_sides(trace, alphabet, budget, cf):
    """Every (model-side sequence, move list, cost) within ``budget``."""

    def rec(i, budget):
        # insert before position i, or handle trace[i]
        if i == len(trace):
            yield (), (), 0.0
        else:
            a = trace[i]
            for seq, moves, c in rec(i + 1, budget):
                yield (a,) + seq, (Move("synchronous", a, a),) + moves, c
            if cf.log(a) <= budget:
                for seq, moves, c in rec(i + 1, budget - cf.log(a)):
                    yield seq, (Move("log", a, None),) + moves, c + cf.log(a)
        for b in alphabet:
            if cf.model(b) <= budget:
                for seq, moves, c in rec(i, budget - cf.model(b)):
                    yield (b,) + seq, (Move("model", None, b),) + moves, c + cf.model(b)

    yield from rec(0, budget)


def enumerate_align(
    t: Trace | Sequence[str], m: Model, max_cost: float, cf: CostFunction = UNIT_COSTS
) -> Alignment | None:
    """Literal enumeration of every deletion/insertion pattern (tiny inputs only)."""
    best = None
    for seq, moves, c in _model_sides(tuple(t), sorted(m.alphabet), max_cost, cf):
        if best is not None and c >= best.cost:
            continue
        if all(satisfies(con, seq) for con in m.constraints):
            best = Alignment(moves, c)
    return best


# ---------------------------------------------------------------------------
# remaining-cost oracle for graph states


def remaining_cost(g: LTGraph, m: Model, cf: CostFunction = UNIT_COSTS, budget: float = 10.0) -> float:
    """Cheapest completion of ``g`` under a relaxation of the graph rules.

    Cells are taken in any order compatible with the arcs and chains, soft
    junctions are ignored, original cells may be dropped at their log cost,
    branched cells resolve freely, and model activities may be inserted
    anywhere except inside a hard-chained pair of kept cells or outside a
    kept pinned cell.  Every completion the search can reach is admitted, so
    the result is a lower bound on the true remaining cost (``inf`` if none
    fits in ``budget``).
    """
    mon = ModelMonitor(m)
    alphabet = sorted(m.alphabet)
    cells = {c.uid: c for _, _, c in g.cells}
    preds: dict[int, set] = {u: set() for u in cells}
    hard_next: dict[int, int] = {}
    node_cells = {n.id: [c.uid for c in n.cells] for n in g.nodes}
    for n in g.nodes:
        for j in range(len(n.cells) - 1):
            u, v = n.cells[j].uid, n.cells[j + 1].uid
            preds[v].add(u)
            if not n.soft[j]:
                hard_next[u] = v
    for a, ds in g.reach.items():
        for d in ds:
            for v in node_cells[d]:
                preds[v] |= set(node_cells[a])
    pf = g.pinned(FIRST)
    pl = g.pinned(LAST)
    first_cell = pf.cells[0].uid if pf is not None else None
    last_cell = pl.cells[-1].uid if pl is not None else None
    everything = frozenset(cells)

    # state: (done cells, required next kept cell, closed for insertions, monitors)
    start = (frozenset(), None, False, mon.start)
    best = {start: 0.0}
    tie = itertools.count()
    heap = [(0.0, next(tie), start)]
    while heap:
        cost, _, state = heapq.heappop(heap)
        if cost > best[state]:
            continue
        done, need, closed, ms = state
        if done == everything and need is None and mon.accept(ms):
            return cost
        succ = []
        ready = [u for u in cells if u not in done and preds[u] <= done]
        for u in ready:
            cell = cells[u]
            nxt_need = hard_next.get(u)
            nxt_closed = closed or u == last_cell
            if need is None or need == u:
                for a in sorted(cell.choices):
                    succ.append(((done | {u}, nxt_need, nxt_closed, mon.step(ms, a)), 0.0))
            if not cell.inserted:
                (a,) = cell.choices
                # dropping u frees the chain requirement through it
                succ.append(((done | {u}, None if need == u else need, closed, ms), cf.log(a)))
        can_insert = need is None and not closed and (first_cell is None or first_cell in done)
        if can_insert:
            for a in alphabet:
                succ.append(((done, None, closed, mon.step(ms, a)), cf.model(a)))
        for nxt, c in succ:
            total = cost + c
            if total > budget + 1e-9 or mon.dead(nxt[3]):
                continue
            if total < best.get(nxt, math.inf):
                best[nxt] = total
                heapq.heappush(heap, (total, next(tie), nxt))
    return math.inf


# ---------------------------------------------------------------------------
# instance generation

ALL_TEMPLATES = tuple(TEMPLATES)


@dataclass(frozen=True)
class InstanceSpec:
    alphabet_size: int = 5
    constraint_count: int = 4
    trace_length: int = 8
    template_pool: tuple[str, ...] = ALL_TEMPLATES
    seed: int = 0
    max_branch: int = 2

    def __post_init__(self):
        if not 1 <= self.alphabet_size <= 8:
            raise ValueError("alphabet_size must be in 1..8")
        if not 0 <= self.constraint_count <= 6:
            raise ValueError("constraint_count must be in 0..6")
        if not 0 <= self.trace_length <= 10:
            raise ValueError("trace_length must be in 0..10")
        if not 1 <= self.max_branch <= 2:
            raise ValueError("max_branch must be 1 or 2")
        unknown = set(self.template_pool) - set(TEMPLATES)
        if unknown or not self.template_pool:
            raise ValueError(f"bad template pool {sorted(unknown)}")


def _random_constraint(rng: random.Random, names: list[str], template: str, max_branch: int) -> Constraint:
    tpl = TEMPLATES[template]
    pool = list(names)
    rng.shuffle(pool)
    params = []
    for _ in range(tpl.arity):
        k = min(rng.randint(1, max_branch), len(pool))
        if k == 0:
            break
        params.append(frozenset(pool[:k]))
        pool = pool[k:]
    if len(params) < tpl.arity:
        # alphabet too small for disjoint parameters
        params = [frozenset([names[i % len(names)]]) for i in range(tpl.arity)]
    n = rng.randint(1, 3) if tpl.counted else None
    return Constraint(tpl, tuple(params), n)


def generate_instance(spec: InstanceSpec) -> tuple[Trace, Model]:
    rng = random.Random(spec.seed)
    names = [chr(ord("A") + i) for i in range(spec.alphabet_size)]
    pool = sorted(spec.template_pool)
    while True:
        cons = tuple(
            _random_constraint(rng, names, rng.choice(pool), spec.max_branch) for _ in range(spec.constraint_count)
        )
        if cons or spec.constraint_count == 0:
            break
    length = rng.randint(0, spec.trace_length)
    trace = Trace(tuple(rng.choice(names) for _ in range(length)), f"seed{spec.seed}")
    return trace, Model(cons)


def instance_suite(n: int, seed: int, **bounds) -> list[tuple[InstanceSpec, Trace, Model]]:
    out = []
    for k in range(n):
        spec = InstanceSpec(seed=seed * 100_003 + k, **bounds)
        t, m = generate_instance(spec)
        out.append((spec, t, m))
    return out
