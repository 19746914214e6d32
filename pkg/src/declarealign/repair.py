"""Repair actions for violated activations and the choice of what to repair next.

Each catalog entry enumerates every way a compliant completion can treat the
violated activation: deactivate it, bring a target into place (existing cell
or insertion), or push offending cells out of the way.  Multi-cell changes
are grouped into one action.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .evaluator import GraphActivation, View, site_ok, whole_ok
from .ltgraph import (
    FIRST,
    LAST,
    AddArc,
    Cell,
    Fix,
    InsertNode,
    LTGraph,
    MergeChains,
    PinNode,
    RemoveCell,
    SplitChain,
    SubsetCell,
    apply_fix,
)


@dataclass(frozen=True)
class CostFunction:
    model_move_cost: Mapping[str, float] = field(default_factory=dict)
    log_move_cost: Mapping[str, float] = field(default_factory=dict)
    default: float = 1.0

    def __post_init__(self):
        for table in (self.model_move_cost, self.log_move_cost):
            for k, v in table.items():
                if not v > 0:
                    raise ValueError(f"cost for {k!r} must be > 0")
        if not self.default > 0:
            raise ValueError("default cost must be > 0")

    def model(self, a: str) -> float:
        return self.model_move_cost.get(a, self.default)

    def log(self, a: str) -> float:
        return self.log_move_cost.get(a, self.default)

    def insertion_classes(self, acts: Iterable[str]) -> list[tuple[float, frozenset]]:
        """Split ``acts`` into groups of equal insertion cost, cheapest first."""
        groups: dict[float, set] = {}
        for a in acts:
            groups.setdefault(self.model(a), set()).add(a)
        return [(c, frozenset(groups[c])) for c in sorted(groups)]

    @property
    def uniform(self) -> bool:
        vals = set(self.model_move_cost.values()) | set(self.log_move_cost.values())
        return vals <= {self.default}

    def __hash__(self):
        return hash((tuple(sorted(self.model_move_cost.items())), tuple(sorted(self.log_move_cost.items())), self.default))


UNIT_COSTS = CostFunction()


def parse_costs(text: str) -> CostFunction:
    reader = csv.DictReader(io.StringIO(text))
    need = {"activity", "model_move_cost", "log_move_cost"}
    if not reader.fieldnames or need - {f.strip() for f in reader.fieldnames}:
        raise ValueError("costs file needs columns activity,model_move_cost,log_move_cost")
    reader.fieldnames = [f.strip() for f in reader.fieldnames]
    model, log = {}, {}
    for row in reader:
        a = row["activity"].strip()
        model[a] = float(row["model_move_cost"])
        log[a] = float(row["log_move_cost"])
    return CostFunction(model, log)


@dataclass(frozen=True)
class Action:
    fixes: tuple[Fix, ...]
    cost: float
    origin: GraphActivation | None = field(default=None, compare=False)
    removed: frozenset = field(default=frozenset(), compare=False)
    inserted: tuple[tuple[frozenset, float], ...] = field(default=(), compare=False)
    result: LTGraph | None = field(default=None, compare=False, repr=False)

    @property
    def signature(self) -> tuple:
        """Cost-bearing content: removed cell uids and inserted choice sets."""
        return (self.removed, tuple(sorted((tuple(sorted(c)), k) for c, k in self.inserted)))

    @property
    def feasible(self) -> bool:
        return self.result is not None and self.result.acyclic


# ---------------------------------------------------------------------------
# working-graph builder


class _Build:
    __slots__ = ("g", "fixes", "cost", "removed", "inserted")

    def __init__(self, g, fixes=(), cost=0.0, removed=frozenset(), inserted=()):
        self.g = g
        self.fixes = fixes
        self.cost = cost
        self.removed = removed
        self.inserted = inserted

    def do(self, fix: Fix, cost: float = 0.0, removed=frozenset(), inserted=()) -> "_Build":
        return _Build(
            apply_fix(self.g, fix),
            self.fixes + (fix,),
            self.cost + cost,
            self.removed | removed,
            self.inserted + inserted,
        )

    def where(self, uid: int) -> tuple[int, int] | None:
        return self.g.cell_site.get(uid)

    def cell(self, uid: int) -> Cell:
        nid, i = self.g.cell_site[uid]
        return self.g.by_id[nid].cells[i]


Step = Callable[[_Build], list[_Build]]


def _split_after(b: _Build, uid: int) -> _Build:
    nid, i = b.where(uid)
    node = b.g.by_id[nid]
    for j in range(i, len(node.cells) - 1):
        if node.soft[j]:
            return b.do(SplitChain(nid, j + 1))
    return b


def _split_before(b: _Build, uid: int) -> _Build:
    nid, i = b.where(uid)
    node = b.g.by_id[nid]
    for j in range(i - 1, -1, -1):
        if node.soft[j]:
            return b.do(SplitChain(nid, j + 1))
    return b


def _reaches(g: LTGraph, a: int, b: int) -> bool:
    return g.acyclic and b in g.reach[a]


def order(b: _Build, u: int, v: int) -> list[_Build]:
    """Make cell ``u`` precede cell ``v``."""
    su, sv = b.where(u), b.where(v)
    if su is None or sv is None:
        return []
    if su[0] == sv[0]:
        return [b] if su[1] < sv[1] else []
    if _reaches(b.g, su[0], sv[0]):
        return [b]
    b = _split_before(_split_after(b, u), v)
    su, sv = b.where(u), b.where(v)
    if su[0] == sv[0]:
        return [b] if su[1] < sv[1] else []
    return [b.do(AddArc(su[0], sv[0]))]


def order_dir(b: _Build, x: int, y: int, scope: str) -> list[_Build]:
    """Place ``y`` on the ``scope`` side of ``x``."""
    return order(b, x, y) if scope == "after" else order(b, y, x)


def remove(b: _Build, uid: int, cf: CostFunction) -> list[_Build]:
    site = b.where(uid)
    if site is None:
        return [b]
    cell = b.cell(uid)
    if cell.inserted:
        return []
    (act,) = cell.choices
    return [b.do(RemoveCell(*site), cf.log(act), removed=frozenset([uid]))]


def subset(b: _Build, uid: int, keep: frozenset) -> list[_Build]:
    site = b.where(uid)
    if site is None:
        return []
    cell = b.cell(uid)
    new = cell.choices & keep
    if not new:
        return []
    if new == cell.choices:
        return [b]
    return [b.do(SubsetCell(site[0], site[1], new))]


def avoid(b: _Build, uid: int, bad: frozenset, cf: CostFunction) -> list[_Build]:
    """Alternatives making cell ``uid`` unable to resolve into ``bad``."""
    site = b.where(uid)
    if site is None:
        return [b]
    cell = b.cell(uid)
    if cell.choices.isdisjoint(bad):
        return [b]
    return subset(b, uid, cell.choices - bad) + remove(b, uid, cf)


def insert(b: _Build, choices: frozenset, cost: float, after: int | None = None, before: int | None = None):
    """Insert a single-cell node; returns ``(build, new_uid)`` or ``None``."""
    preds, succs = set(), set()
    if after is not None:
        if b.where(after) is None:
            return None
        b = _split_after(b, after)
        preds.add(b.where(after)[0])
    if before is not None:
        if b.where(before) is None:
            return None
        b = _split_before(b, before)
        succs.add(b.where(before)[0])
    uid = b.g.next_uid
    fix = InsertNode((Cell(-1, choices, True),), frozenset(preds), frozenset(succs))
    return b.do(fix, cost, inserted=((choices, cost),)), uid


def clear_side(b: _Build, uid: int, scope: str, cf: CostFunction) -> list[_Build]:
    """Make ``uid`` the last (after) or first (before) cell of its node."""
    nid, i = b.where(uid)
    node = b.g.by_id[nid]
    if scope == "after":
        if i + 1 >= len(node.cells):
            return [b]
        if node.soft[i]:
            return [b.do(SplitChain(nid, i + 1))]
        return remove(b, node.cells[i + 1].uid, cf)
    if i == 0:
        return [b]
    if node.soft[i - 1]:
        return [b.do(SplitChain(nid, i))]
    return remove(b, node.cells[i - 1].uid, cf)


def merge(b: _Build, u: int, v: int, cf: CostFunction) -> list[_Build]:
    """Make ``v`` immediately follow ``u`` through a hard chain junction."""
    su, sv = b.where(u), b.where(v)
    if su is None or sv is None:
        return []
    if su[0] == sv[0]:
        return [b] if sv[1] == su[1] + 1 else []
    out = []
    for b1 in clear_side(b, u, "after", cf):
        for b2 in clear_side(b1, v, "before", cf):
            su, sv = b2.where(u), b2.where(v)
            if su is None or sv is None:
                continue
            if su[0] == sv[0]:
                if sv[1] == su[1] + 1:
                    out.append(b2)
                continue
            out.append(b2.do(MergeChains(su[0], sv[0])))
    return out


def merge_dir(b: _Build, x: int, y: int, scope: str, cf: CostFunction) -> list[_Build]:
    return merge(b, x, y, cf) if scope == "after" else merge(b, y, x, cf)


def pin(b: _Build, uid: int, where: str) -> list[_Build]:
    site = b.where(uid)
    if site is None:
        return []
    nid, i = site
    node = b.g.by_id[nid]
    if where == FIRST and i > 0:
        if not node.soft[i - 1]:
            return []
        b = b.do(SplitChain(nid, i))
    if where == LAST and i < len(node.cells) - 1:
        if not node.soft[i]:
            return []
        b = b.do(SplitChain(nid, i + 1))
    nid, _ = b.where(uid)
    if where in b.g.by_id[nid].pins:
        return [b]
    return [b.do(PinNode(nid, where))]


def chain_steps(builds: list[_Build], steps: Sequence[Step], prune: bool) -> list[_Build]:
    """Apply each step to every alternative in turn (cartesian product)."""
    for step in steps:
        nxt = []
        seen = set()
        for b in builds:
            for b2 in step(b):
                if prune and not b2.g.acyclic:
                    continue
                # different fix orders often reach the same graph
                key = (b2.g.nodes, b2.g.arcs)
                if key in seen:
                    continue
                seen.add(key)
                nxt.append(b2)
        builds = nxt
        if not builds:
            break
    return builds


# ---------------------------------------------------------------------------
# catalog


def _back(scope: str) -> str:
    return "before" if scope == "after" else "after"


class _Catalog:
    def __init__(self, g: LTGraph, view: View, act: GraphActivation, cf: CostFunction, alphabet, prune: bool):
        self.g, self.view, self.a, self.cf, self.prune = g, view, act, cf, prune
        self.part = act.part
        self.alphabet = frozenset(alphabet) if alphabet is not None else act.constraint.activities
        self.out: list[_Build] = []

    def emit(self, builds: Iterable[_Build]):
        for b in builds:
            if self.prune and not b.g.acyclic:
                continue
            self.out.append(b)

    def run(self, steps: Sequence[Step], start: _Build | None = None):
        self.emit(chain_steps([start or _Build(self.g)], steps, self.prune))

    def may(self, uid: int, s: frozenset) -> bool:
        return not self.view.cells[uid].choices.isdisjoint(s)

    def must(self, uid: int, s: frozenset) -> bool:
        return self.view.cells[uid].choices <= s

    def deactivate_site(self):
        x = self.a.site
        self.run([lambda b: avoid(b, x, self.part.activation, self.cf)])

    def inserts(self, acts: frozenset):
        return self.cf.insertion_classes(acts & self.alphabet)

    # -- relation rules ---------------------------------------------------

    def exists(self):
        x, part, view = self.a.site, self.part, self.view
        self.deactivate_site()
        tgt = part.target
        for y in view.uids():
            if y == x or not self.may(y, tgt):
                continue
            if part.scope == "any":
                self.run([lambda b, y=y: subset(b, y, tgt)])
            elif not view.rel(x, y, _back(part.scope)):
                self.run([lambda b, y=y: subset(b, y, tgt), lambda b, y=y: order_dir(b, x, y, part.scope)])
        for cost, cls in self.inserts(tgt):
            if part.scope == "any":
                r = insert(_Build(self.g), cls, cost)
            elif part.scope == "after":
                r = insert(_Build(self.g), cls, cost, after=x)
            else:
                r = insert(_Build(self.g), cls, cost, before=x)
            if r is not None:
                self.emit([r[0]])

    def alt(self):
        x, part, view = self.a.site, self.part, self.view
        scope, back, act, tgt = part.scope, _back(part.scope), part.activation, part.target
        self.deactivate_site()
        blockers = [z for z in view.uids() if z != x and self.may(z, act)]

        def guard(y_exists: bool, y: int):
            steps = []
            for z in blockers:
                if z == y:
                    continue
                if view.rel(x, z, back) or (y_exists and view.rel(y, z, scope)):
                    continue

                def opts(b, z=z):
                    return order_dir(b, x, z, back) + order_dir(b, y, z, scope) + avoid(b, z, act, self.cf)

                steps.append(opts)
            return steps

        for y in view.uids():
            if y == x or not self.may(y, tgt) or view.rel(x, y, back):
                continue
            steps = [lambda b, y=y: subset(b, y, tgt), lambda b, y=y: order_dir(b, x, y, scope)]
            self.run(steps + guard(True, y))
        for cost, cls in self.inserts(tgt):
            kw = {"after": x} if scope == "after" else {"before": x}
            r = insert(_Build(self.g), cls, cost, **kw)
            if r is not None:
                b, y = r
                self.run(guard(False, y), start=b)

    def chain(self):
        x, part, view = self.a.site, self.part, self.view
        scope, back, tgt = part.scope, _back(part.scope), part.target
        self.deactivate_site()
        for y in view.uids():
            if y == x or not self.may(y, tgt) or view.rel(x, y, back):
                continue
            between = [z for z in view.uids() if z not in (x, y) and view.rel(x, z, scope) and view.rel(z, y, scope)]
            if any(view.cells[z].inserted for z in between):
                continue
            steps: list[Step] = [lambda b, z=z: remove(b, z, self.cf) for z in between]
            steps.append(lambda b, y=y: subset(b, y, tgt))
            steps.append(lambda b, y=y: merge_dir(b, x, y, scope, self.cf))
            self.run(steps)
        for cost, cls in self.inserts(tgt):
            for b in clear_side(_Build(self.g), x, scope, self.cf):
                r = insert(b, cls, cost)
                if r is not None:
                    b2, y = r
                    self.emit(merge_dir(b2, x, y, scope, self.cf))

    def not_any(self):
        x, part, view = self.a.site, self.part, self.view
        act, tgt = part.activation, part.target
        if act.isdisjoint(tgt):
            sides = [[z for z in view.uids() if self.may(z, act)], [y for y in view.uids() if y != x and self.may(y, tgt)]]
            for cells, bad in zip(sides, (act, tgt)):
                self.run([lambda b, z=z, bad=bad: avoid(b, z, bad, self.cf) for z in cells])
            return
        self.deactivate_site()
        ys = [y for y in view.uids() if y != x and self.may(y, tgt)]
        self.run([lambda b, y=y: avoid(b, y, tgt, self.cf) for y in ys])

    def not_dir(self):
        x, part, view = self.a.site, self.part, self.view
        back, tgt = _back(part.scope), part.target
        self.deactivate_site()
        ys = [y for y in view.uids() if y != x and self.may(y, tgt) and not view.rel(x, y, back)]

        def opts(b, y):
            return order_dir(b, x, y, back) + avoid(b, y, tgt, self.cf)

        self.run([lambda b, y=y: opts(b, y) for y in ys])

    def notchain(self):
        x, part, view = self.a.site, self.part, self.view
        scope, back, tgt = part.scope, _back(part.scope), part.target
        self.deactivate_site()
        nb = view.neighbor(x, scope)
        if nb is not None:
            self.run([lambda b: subset(b, nb[0], view.cells[nb[0]].choices - tgt)])
        # x becomes the very last (first) activity
        beyond = [z for z in view.uids() if z != x and view.rel(x, z, scope)]
        if not any(view.cells[z].inserted for z in beyond):
            steps: list[Step] = [lambda b, z=z: remove(b, z, self.cf) for z in beyond]
            steps.append(lambda b: pin(b, x, LAST if scope == "after" else FIRST))
            self.run(steps)
        # an existing non-target cell w becomes the neighbour
        for w in view.uids():
            if w == x or self.must(w, tgt) or view.rel(x, w, back):
                continue
            if nb is not None and w == nb[0]:
                continue
            between = [z for z in view.uids() if z not in (x, w) and view.rel(x, z, scope) and view.rel(z, w, scope)]
            if any(view.cells[z].inserted for z in between):
                continue
            steps = [lambda b, z=z: remove(b, z, self.cf) for z in between]
            steps.append(lambda b, w=w: subset(b, w, view.cells[w].choices - tgt))
            steps.append(lambda b, w=w: merge_dir(b, x, w, scope, self.cf))
            self.run(steps)
        # a new filler activity becomes the neighbour
        for cost, cls in self.inserts(self.alphabet - tgt):
            for b in clear_side(_Build(self.g), x, scope, self.cf):
                r = insert(b, cls, cost)
                if r is not None:
                    b2, w = r
                    self.emit(merge_dir(b2, x, w, scope, self.cf))

    # -- whole-graph rules ------------------------------------------------

    def init_end(self):
        view, tgt = self.view, self.part.target
        where = FIRST if self.part.kind == "init" else LAST
        scope = "before" if where == FIRST else "after"
        for y in view.uids():
            if not self.may(y, tgt):
                continue
            beyond = [z for z in view.uids() if z != y and view.rel(y, z, scope)]
            if any(view.cells[z].inserted for z in beyond):
                continue
            steps: list[Step] = [lambda b, z=z: remove(b, z, self.cf) for z in beyond]
            steps.append(lambda b, y=y: subset(b, y, tgt))
            steps.append(lambda b, y=y: pin(b, y, where))
            self.run(steps)
        pinned = self.g.pinned(where)
        blocking = [c.uid for c in pinned.cells] if pinned is not None else []
        if any(view.cells[z].inserted for z in blocking):
            return
        for cost, cls in self.inserts(tgt):
            for b in chain_steps([_Build(self.g)], [lambda b, z=z: remove(b, z, self.cf) for z in blocking], False):
                r = insert(b, cls, cost)
                if r is not None:
                    b2, y = r
                    self.emit(pin(b2, y, where))

    def count(self):
        view, part, cf = self.view, self.part, self.cf
        tgt, lo, hi = part.target, part.lo, part.hi
        relevant = [u for u in view.uids() if self.may(u, tgt)]
        options = []  # per cell: list of (step, must_after, may_after)
        for u in relevant:
            cell = view.cells[u]
            opts = []
            is_must = cell.choices <= tgt
            opts.append((None, is_must, True))
            if not is_must and lo > 0:
                opts.append(("in", True, True))
            if hi is not None:
                if not is_must:
                    opts.append(("out", False, False))
                if not cell.inserted:
                    opts.append(("remove", False, False))
            options.append(opts)
        classes = self.inserts(tgt)
        for combo in itertools.product(*options):
            must_n = sum(1 for _, m, _ in combo if m)
            may_n = sum(1 for _, _, m in combo if m)
            need = max(0, lo - must_n)
            if hi is not None and may_n + need > hi:
                continue
            if need and not classes:
                continue
            steps: list[Step] = []
            for u, (kind, _, _) in zip(relevant, combo):
                if kind == "in":
                    steps.append(lambda b, u=u: subset(b, u, tgt))
                elif kind == "out":
                    steps.append(lambda b, u=u: subset(b, u, view.cells[u].choices - tgt))
                elif kind == "remove":
                    steps.append(lambda b, u=u: remove(b, u, cf))
            builds = chain_steps([_Build(self.g)], steps, self.prune)
            for picks in itertools.combinations_with_replacement(classes, need):
                for b in builds:
                    for cost, cls in picks:
                        b = insert(b, cls, cost)[0]
                    self.emit([b])

    def choice(self):
        tgt = self.part.target
        for u in self.view.uids():
            if self.may(u, tgt):
                self.run([lambda b, u=u: subset(b, u, tgt)])
        for cost, cls in self.inserts(tgt):
            self.emit([insert(_Build(self.g), cls, cost)[0]])

    def xchoice(self):
        view, part = self.view, self.part
        a, bset = part.activation, part.target
        for side, other in ((a, bset), (bset, a)):
            offenders = [u for u in view.uids() if self.may(u, other)]
            base = chain_steps(
                [_Build(self.g)], [lambda b, u=u: avoid(b, u, other, self.cf) for u in offenders], self.prune
            )
            for b in base:
                cells = [c for _, _, c in b.g.cells]
                if any(c.choices <= side for c in cells):
                    self.emit([b])
                    continue
                for c in cells:
                    if not c.choices.isdisjoint(side):
                        self.emit(subset(b, c.uid, side))
                for cost, cls in self.inserts(side - other):
                    self.emit([insert(b, cls, cost)[0]])

    def build(self) -> list[_Build]:
        kind = self.part.kind
        handler = {
            "exists": self.exists,
            "alt": self.alt,
            "chain": self.chain,
            "notchain": self.notchain,
            "count": self.count,
            "init": self.init_end,
            "end": self.init_end,
            "choice": self.choice,
            "xchoice": self.xchoice,
        }.get(kind)
        if kind == "not":
            handler = self.not_any if self.part.scope == "any" else self.not_dir
        handler()
        return self.out


def resolves(action: Action) -> bool:
    """Whether the action's result no longer reports its origin activation."""
    g = action.result
    if g is None or not g.acyclic:
        return False
    a = action.origin
    view = View(g)
    if a.site is None:
        return whole_ok(view, a.part)
    if a.site not in view.cells:
        return True
    if view.cells[a.site].choices.isdisjoint(a.part.activation):
        return True
    return site_ok(view, a.part, a.site)


def propose_actions(
    g: LTGraph,
    a: GraphActivation,
    cf: CostFunction = UNIT_COSTS,
    *,
    alphabet: Iterable[str] | None = None,
    view: View | None = None,
    feasible_only: bool = True,
) -> list[Action]:
    """Candidate repairs for activation ``a``.

    With ``feasible_only`` actions whose result is cyclic are dropped.
    """
    view = view or View(g)
    builds = _Catalog(g, view, a, cf, alphabet, feasible_only).build()
    seen = set()
    out = []
    for b in builds:
        if not b.fixes or b.fixes in seen:
            continue
        seen.add(b.fixes)
        act = Action(b.fixes, b.cost, a, b.removed, b.inserted, b.g)
        if b.g.acyclic and not resolves(act):
            continue
        out.append(act)
    return out


# ---------------------------------------------------------------------------
# activation selection


def average_cost(actions: Sequence[Action]) -> float:
    if not actions:
        return math.inf
    return sum(x.cost for x in actions) / len(actions)


def _tie_prefers_last(a: GraphActivation) -> bool:
    part = a.part
    if part.whole:
        return False
    forward = part.scope in ("after", "any")
    return forward != part.negative


def select_activation(
    violated: Sequence[GraphActivation],
    proposals: Mapping[tuple, Sequence[Action]],
    position: Mapping[int, int] | None = None,
) -> GraphActivation:
    """Pick the activation to repair next.

    Highest average proposal cost wins; ties go to the last violated site of
    forward-looking positive (and backward-looking negative) rules, the
    first otherwise, then declaration order.
    """
    position = position or {}
    groups: dict[tuple, list[GraphActivation]] = {}
    for a in violated:
        groups.setdefault((a.cidx, a.pidx), []).append(a)

    def pos(a):
        return -1 if a.site is None else position.get(a.site, a.site)

    best = None
    for a in violated:
        avg = average_cost(proposals.get(a.key, ()))
        peers = groups[(a.cidx, a.pidx)]
        extreme = max(peers, key=pos) if _tie_prefers_last(a) else min(peers, key=pos)
        rank = 0 if a is extreme else 1
        key = (-avg, rank, a.cidx, a.pidx, pos(a))
        if best is None or key < best[0]:
            best = (key, a)
    return best[1]
