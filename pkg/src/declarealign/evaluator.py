"""Constraint evaluation over a partial-order graph.

A constraint holds in a graph only if it holds in every linearization under
every choice of branched activities.  The rules below decide this
structurally; positive chain rules and Init/End are deliberately stricter
(they only trust merged chains and pins) so that an activation they report
can always be certified by a cost-free merge or pin.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .ltgraph import FIRST, LAST, Cell, CycleError, LTGraph
from .model import Constraint, Model, Part


@dataclass(frozen=True)
class GraphActivation:
    constraint: Constraint
    cidx: int  # declaration order of the constraint in its model
    pidx: int  # index of the rule within the constraint
    site: int | None  # cell uid, or None for whole-graph rules
    triggering: frozenset = frozenset()

    @property
    def part(self) -> Part:
        return self.constraint.parts[self.pidx]

    @property
    def key(self) -> tuple:
        return (self.cidx, self.pidx, self.site)


class View:
    """Order queries over an acyclic graph at cell granularity."""

    def __init__(self, g: LTGraph):
        if not g.acyclic:
            raise CycleError("graph has a cycle")
        self.g = g
        self.reach = g.reach
        self.site = g.cell_site
        self.cells: dict[int, Cell] = {c.uid: c for _, _, c in g.cells}

    def before(self, u: int, v: int) -> bool:
        """Cell ``u`` precedes cell ``v`` in every linearization."""
        (nu, iu), (nv, iv) = self.site[u], self.site[v]
        if nu == nv:
            return iu < iv
        return nv in self.reach[nu]

    def rel(self, x: int, y: int, scope: str) -> bool:
        """Cell ``y`` lies on the ``scope`` side of ``x`` in every linearization."""
        return self.before(x, y) if scope == "after" else self.before(y, x)

    def neighbor(self, x: int, scope: str) -> tuple[int, bool] | None:
        """Chain neighbour of ``x`` on the ``scope`` side and whether the junction is soft."""
        nid, i = self.site[x]
        node = self.g.by_id[nid]
        if scope == "after":
            if i + 1 < len(node.cells):
                return node.cells[i + 1].uid, node.soft[i]
        elif i > 0:
            return node.cells[i - 1].uid, node.soft[i - 1]
        return None

    def adjacent_possible(self, n1: int, n2: int) -> bool:
        """Node ``n2`` can immediately follow node ``n1`` in some linearization."""
        if n1 == n2 or n1 in self.reach[n2]:
            return False
        return not any(n2 in self.reach[k] for k in self.reach[n1])

    def boundary_cells(self, scope: str) -> Iterable[tuple[int, Cell]]:
        for node in self.g.nodes:
            yield node.id, node.cells[0] if scope == "after" else node.cells[-1]

    def uids(self) -> Iterable[int]:
        return self.cells.keys()


def _must(c: Cell, s: frozenset) -> bool:
    return c.choices <= s


def _may(c: Cell, s: frozenset) -> bool:
    return not c.choices.isdisjoint(s)


def whole_ok(view: View, part: Part) -> bool:
    cells = list(view.cells.values())
    kind, tgt = part.kind, part.target
    if kind == "count":
        if sum(1 for c in cells if _must(c, tgt)) < part.lo:
            return False
        return part.hi is None or sum(1 for c in cells if _may(c, tgt)) <= part.hi
    if kind in ("init", "end"):
        node = view.g.pinned(FIRST if kind == "init" else LAST)
        if node is None:
            return False
        cell = node.cells[0] if kind == "init" else node.cells[-1]
        return _must(cell, tgt)
    if kind == "choice":
        return any(_must(c, tgt) for c in cells)
    if kind == "xchoice":
        a, b = part.activation, part.target
        if not any(_must(c, a | b) for c in cells):
            return False
        if any(_may(c, a & b) for c in cells):
            return False
        may_a = [c.uid for c in cells if _may(c, a)]
        may_b = [c.uid for c in cells if _may(c, b)]
        return not any(x != y for x in may_a for y in may_b)
    raise ValueError(kind)


def site_ok(view: View, part: Part, x: int) -> bool:
    """Whether the activation at cell ``x`` holds universally."""
    kind, scope, tgt, act = part.kind, part.scope, part.target, part.activation
    cells = view.cells
    if kind == "exists":
        if scope == "any":
            return any(y != x and _must(c, tgt) for y, c in cells.items())
        return any(_must(c, tgt) and view.rel(x, y, scope) for y, c in cells.items())
    if kind == "alt":
        back = "before" if scope == "after" else "after"
        blockers = [z for z, c in cells.items() if z != x and _may(c, act)]
        for y, c in cells.items():
            if not (_must(c, tgt) and view.rel(x, y, scope)):
                continue
            if all(z == y or view.rel(x, z, back) or view.rel(y, z, scope) for z in blockers):
                return True
        return False
    if kind == "chain":
        nb = view.neighbor(x, scope)
        return nb is not None and _must(cells[nb[0]], tgt)
    if kind == "not":
        if scope == "any":
            return not any(y != x and _may(c, tgt) for y, c in cells.items())
        back = "before" if scope == "after" else "after"
        return not any(y != x and _may(c, tgt) and not view.rel(x, y, back) for y, c in cells.items())
    if kind == "notchain":
        nb = view.neighbor(x, scope)
        if nb is not None:
            return not _may(cells[nb[0]], tgt)
        xn = view.site[x][0]
        for mid, cell in view.boundary_cells(scope):
            if mid == xn or not _may(cell, tgt):
                continue
            ok = view.adjacent_possible(xn, mid) if scope == "after" else view.adjacent_possible(mid, xn)
            if ok:
                return False
        return True
    raise ValueError(kind)


def part_violations(view: View, c: Constraint, cidx: int, pidx: int) -> list[GraphActivation]:
    part = c.parts[pidx]
    if part.whole:
        return [] if whole_ok(view, part) else [GraphActivation(c, cidx, pidx, None)]
    out = []
    for _, _, cell in view.g.cells:
        trig = cell.choices & part.activation
        if trig and not site_ok(view, part, cell.uid):
            out.append(GraphActivation(c, cidx, pidx, cell.uid, trig))
    return out


def violated_activations(g: LTGraph | View, c: Constraint, cidx: int = 0) -> list[GraphActivation]:
    view = g if isinstance(g, View) else View(g)
    out = []
    for pidx in range(len(c.parts)):
        out.extend(part_violations(view, c, cidx, pidx))
    return out


def all_violations(g: LTGraph | View, m: Model) -> list[GraphActivation]:
    view = g if isinstance(g, View) else View(g)
    out = []
    for cidx, c in enumerate(m.constraints):
        out.extend(violated_activations(view, c, cidx))
    return out


def is_goal(g: LTGraph, m: Model) -> bool:
    return not all_violations(g, m)
