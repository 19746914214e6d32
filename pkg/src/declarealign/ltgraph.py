"""Partial-order state graph over activity cells.

A graph node holds a chain of cells that must appear contiguously and in
order; arcs between nodes are strict precedences.  Chain junctions are either
*hard* (created by a repair, permanent) or *soft* (created by preprocessing
and splittable at no cost).  Graph values are immutable; ``apply_fix``
returns a new graph.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, Sequence

from .model import Trace

FIRST, LAST = "first", "last"


class GraphError(ValueError):
    pass


class CycleError(GraphError):
    pass


@dataclass(frozen=True)
class Cell:
    uid: int
    choices: frozenset
    inserted: bool = False

    @property
    def trace_index(self) -> int | None:
        return None if self.inserted else self.uid

    def label(self) -> str:
        body = ",".join(sorted(self.choices))
        body = f"[{body}]" if len(self.choices) > 1 else body
        return f"+{body}" if self.inserted else f"{body}_{self.uid}"


@dataclass(frozen=True)
class LTNode:
    id: int
    cells: tuple[Cell, ...]
    soft: tuple[bool, ...] = ()  # one flag per junction: True = splittable
    pins: frozenset = frozenset()

    def __post_init__(self):
        if not self.cells:
            raise GraphError("node without cells")
        if len(self.soft) != len(self.cells) - 1:
            raise GraphError("junction flags do not match chain length")

    @property
    def pinned(self) -> str | None:
        if FIRST in self.pins:
            return FIRST
        return LAST if LAST in self.pins else None

    def label(self) -> str:
        out = self.cells[0].label()
        for flag, cell in zip(self.soft, self.cells[1:]):
            out += (" ~ " if flag else " > ") + cell.label()
        if self.pins:
            out += " {" + ",".join(sorted(self.pins)) + "}"
        return out


# ---------------------------------------------------------------------------
# fixes


@dataclass(frozen=True)
class InsertNode:
    cells: tuple[Cell, ...]
    preds: frozenset = frozenset()
    succs: frozenset = frozenset()


@dataclass(frozen=True)
class RemoveCell:
    node: int
    index: int = 0


@dataclass(frozen=True)
class AddArc:
    origin: int
    dest: int


@dataclass(frozen=True)
class PinNode:
    node: int
    where: str


@dataclass(frozen=True)
class SubsetCell:
    node: int
    index: int
    choices: frozenset


@dataclass(frozen=True)
class MergeChains:
    front: int
    back: int
    soft: bool = False


@dataclass(frozen=True)
class SplitChain:
    node: int
    cut: int  # cells[:cut] stay, cells[cut:] move to a new node


Fix = InsertNode | RemoveCell | AddArc | PinNode | SubsetCell | MergeChains | SplitChain
COSTLY_FIXES = (InsertNode, RemoveCell)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LTGraph:
    nodes: tuple[LTNode, ...] = ()
    arcs: frozenset = frozenset()
    next_id: int = 0
    next_uid: int = 0

    # -- construction -----------------------------------------------------

    @classmethod
    def from_trace(cls, trace: Trace | Sequence[str]) -> "LTGraph":
        acts = tuple(trace)
        nodes = tuple(LTNode(i, (Cell(i, frozenset([a])),)) for i, a in enumerate(acts))
        arcs = frozenset((i, i + 1) for i in range(len(acts) - 1))
        return cls(nodes, arcs, len(acts), len(acts))

    # -- lookups ----------------------------------------------------------

    @cached_property
    def by_id(self) -> dict[int, LTNode]:
        return {n.id: n for n in self.nodes}

    def node(self, nid: int) -> LTNode:
        try:
            return self.by_id[nid]
        except KeyError:
            raise GraphError(f"dangling node id {nid}") from None

    @cached_property
    def succ(self) -> dict[int, frozenset]:
        out: dict[int, set] = {n.id: set() for n in self.nodes}
        for a, b in self.arcs:
            out[a].add(b)
        return {k: frozenset(v) for k, v in out.items()}

    @cached_property
    def pred(self) -> dict[int, frozenset]:
        out: dict[int, set] = {n.id: set() for n in self.nodes}
        for a, b in self.arcs:
            out[b].add(a)
        return {k: frozenset(v) for k, v in out.items()}

    @cached_property
    def cells(self) -> tuple[tuple[int, int, Cell], ...]:
        return tuple((n.id, i, c) for n in self.nodes for i, c in enumerate(n.cells))

    @cached_property
    def cell_site(self) -> dict[int, tuple[int, int]]:
        return {c.uid: (nid, i) for nid, i, c in self.cells}

    @cached_property
    def closure(self) -> dict[int, frozenset] | None:
        """Strict descendants of every node, or ``None`` when cyclic."""
        order = _kahn(self)
        if order is None:
            return None
        out: dict[int, frozenset] = {}
        for nid in reversed(order):
            acc = set()
            for s in self.succ[nid]:
                acc.add(s)
                acc |= out[s]
            out[nid] = frozenset(acc)
        return out

    @property
    def acyclic(self) -> bool:
        return self.closure is not None

    @property
    def reach(self) -> dict[int, frozenset]:
        """Strict descendants of every node (requires an acyclic graph)."""
        out = self.closure
        if out is None:
            raise CycleError("graph has a cycle")
        return out

    def pinned(self, where: str) -> LTNode | None:
        for n in self.nodes:
            if where in n.pins:
                return n
        return None

    def __len__(self) -> int:
        return len(self.nodes)

    def debug_text(self) -> str:
        lines = [f"n{n.id}: {n.label()}" for n in self.nodes]
        lines += [f"n{a} -> n{b}" for a, b in sorted(self.arcs)]
        return "\n".join(lines)

    def __str__(self) -> str:
        return self.debug_text()


def from_trace(trace: Trace | Sequence[str]) -> LTGraph:
    return LTGraph.from_trace(trace)


def _replace_nodes(g: LTGraph, nodes: dict[int, LTNode], arcs: set, **kw) -> LTGraph:
    return LTGraph(
        tuple(nodes[k] for k in sorted(nodes)),
        frozenset(arcs),
        kw.get("next_id", g.next_id),
        kw.get("next_uid", g.next_uid),
    )


def apply_fix(g: LTGraph, f: Fix) -> LTGraph:
    """Return the graph obtained by applying ``f``; the result may be cyclic."""
    h = _apply(g, f)
    if "closure" in g.__dict__ and g.closure is not None:
        known = _derived_closure(g, h, f)
        if known is not _UNKNOWN:
            h.__dict__["closure"] = known
    return h


_UNKNOWN = object()


def _add_arcs(reach: dict, arcs) -> dict | None:
    """Closure after adding ``arcs`` to an acyclic graph, or ``None`` if cyclic."""
    reach = dict(reach)
    for a, b in arcs:
        if b in reach[a]:
            continue
        if a == b or a in reach[b]:
            return None
        gain = reach[b] | {b}
        for x, r in reach.items():
            if x == a or a in r:
                reach[x] = r | gain
    return reach


def _derived_closure(g: LTGraph, h: LTGraph, f: Fix):
    """The closure of ``h`` derived cheaply from ``g``'s, when the fix allows it."""
    if isinstance(f, SubsetCell):
        return g.closure
    if isinstance(f, (AddArc, PinNode)):
        return _add_arcs(g.closure, h.arcs - g.arcs)
    if isinstance(f, InsertNode):
        (nid,) = set(h.by_id) - set(g.by_id)
        base = dict(g.closure)
        base[nid] = frozenset()
        return _add_arcs(base, h.arcs - g.arcs)
    return _UNKNOWN


def _apply(g: LTGraph, f: Fix) -> LTGraph:
    nodes = dict(g.by_id)
    arcs = set(g.arcs)

    if isinstance(f, InsertNode):
        for x in f.preds | f.succs:
            g.node(x)
        nid = g.next_id
        uid = g.next_uid
        cells = []
        for c in f.cells:
            cells.append(Cell(uid, c.choices, True))
            uid += 1
        nodes[nid] = LTNode(nid, tuple(cells), (False,) * (len(cells) - 1))
        arcs |= {(p, nid) for p in f.preds} | {(nid, s) for s in f.succs}
        first, last = g.pinned(FIRST), g.pinned(LAST)
        if first is not None:
            arcs.add((first.id, nid))
        if last is not None:
            arcs.add((nid, last.id))
        return _replace_nodes(g, nodes, arcs, next_id=nid + 1, next_uid=uid)

    if isinstance(f, RemoveCell):
        node = g.node(f.node)
        if not 0 <= f.index < len(node.cells):
            raise GraphError("cell index out of range")
        preds, succs = g.pred[node.id], g.succ[node.id]
        del nodes[node.id]
        arcs = {(a, b) for a, b in arcs if node.id not in (a, b)}
        left = node.cells[: f.index]
        right = node.cells[f.index + 1 :]
        parts = []
        next_id = g.next_id
        if left:
            parts.append(LTNode(node.id, left, node.soft[: f.index - 1] if f.index else (), node.pins & {FIRST}))
        if right:
            rid = next_id if left else node.id
            if left:
                next_id += 1
            parts.append(LTNode(rid, right, node.soft[f.index + 1 :], node.pins & {LAST}))
        for p in parts:
            nodes[p.id] = p
            arcs |= {(a, p.id) for a in preds} | {(p.id, b) for b in succs}
        if len(parts) == 2:
            arcs.add((parts[0].id, parts[1].id))
        if not parts:
            arcs |= {(a, b) for a in preds for b in succs}
        return _replace_nodes(g, nodes, arcs, next_id=next_id)

    if isinstance(f, AddArc):
        g.node(f.origin), g.node(f.dest)
        arcs.add((f.origin, f.dest))
        return _replace_nodes(g, nodes, arcs)

    if isinstance(f, PinNode):
        node = g.node(f.node)
        if f.where not in (FIRST, LAST):
            raise GraphError(f"bad pin {f.where!r}")
        for other in g.nodes:
            if other.id != node.id:
                arcs.add((node.id, other.id) if f.where == FIRST else (other.id, node.id))
        nodes[node.id] = replace(node, pins=node.pins | {f.where})
        return _replace_nodes(g, nodes, arcs)

    if isinstance(f, SubsetCell):
        node = g.node(f.node)
        if not 0 <= f.index < len(node.cells):
            raise GraphError("cell index out of range")
        old = node.cells[f.index]
        if not f.choices or not f.choices <= old.choices:
            raise GraphError("subset must be a nonempty subset of the current choices")
        cells = list(node.cells)
        cells[f.index] = replace(old, choices=frozenset(f.choices))
        nodes[node.id] = replace(node, cells=tuple(cells))
        return _replace_nodes(g, nodes, arcs)

    if isinstance(f, MergeChains):
        front, back = g.node(f.front), g.node(f.back)
        if front.id == back.id:
            raise GraphError("cannot merge a node with itself")
        merged = LTNode(
            front.id,
            front.cells + back.cells,
            front.soft + (f.soft,) + back.soft,
            front.pins | back.pins,
        )
        del nodes[back.id]
        nodes[front.id] = merged
        new_arcs = set()
        for a, b in arcs:
            a2 = front.id if a == back.id else a
            b2 = front.id if b == back.id else b
            if (a, b) == (front.id, back.id):
                continue
            new_arcs.add((a2, b2))
        return _replace_nodes(g, nodes, new_arcs)

    if isinstance(f, SplitChain):
        node = g.node(f.node)
        if not 0 < f.cut < len(node.cells):
            raise GraphError("invalid cut")
        nid = g.next_id
        left = LTNode(node.id, node.cells[: f.cut], node.soft[: f.cut - 1], node.pins & {FIRST})
        right = LTNode(nid, node.cells[f.cut :], node.soft[f.cut :], node.pins & {LAST})
        nodes[left.id] = left
        nodes[nid] = right
        preds, succs = g.pred[node.id], g.succ[node.id]
        arcs = {(a, b) for a, b in arcs if node.id not in (a, b)}
        for p in (left, right):
            arcs |= {(a, p.id) for a in preds} | {(p.id, b) for b in succs}
        arcs.add((left.id, nid))
        return _replace_nodes(g, nodes, arcs, next_id=nid + 1)

    raise TypeError(f"unknown fix {f!r}")


def apply_fixes(g: LTGraph, fixes: Sequence[Fix]) -> LTGraph:
    for f in fixes:
        g = apply_fix(g, f)
    return g


# ---------------------------------------------------------------------------
# order queries


def _kahn(g: LTGraph) -> list[int] | None:
    indeg = {n.id: 0 for n in g.nodes}
    for a, b in g.arcs:
        if a == b:
            return None
        indeg[b] += 1
    ready = sorted(k for k, v in indeg.items() if v == 0)
    out = []
    while ready:
        x = ready.pop()
        out.append(x)
        for s in g.succ[x]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    return out if len(out) == len(g.nodes) else None


def has_cycle(g: LTGraph) -> bool:
    return g.closure is None


def _sort_key(node: LTNode):
    originals = [c.uid for c in node.cells if not c.inserted]
    return (
        min(originals) if originals else float("inf"),
        0 if originals else 1,
        tuple(tuple(sorted(c.choices)) for c in node.cells),
        node.id,
    )


def topological_sort(g: LTGraph) -> list[tuple[int, Cell]]:
    """Deterministic linear order of all cells consistent with arcs and chains.

    Ready nodes are taken by smallest original trace index, then originals
    before inserted nodes, then lexicographically smallest choices.
    """
    indeg = {n.id: 0 for n in g.nodes}
    for a, b in g.arcs:
        if a == b:
            raise CycleError("graph has a cycle")
        indeg[b] += 1
    heap = [(_sort_key(g.by_id[k]), k) for k, v in indeg.items() if v == 0]
    heapq.heapify(heap)
    out: list[tuple[int, Cell]] = []
    done = 0
    while heap:
        _, nid = heapq.heappop(heap)
        done += 1
        out.extend((nid, c) for c in g.by_id[nid].cells)
        for s in sorted(g.succ[nid]):
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(heap, (_sort_key(g.by_id[s]), s))
    if done != len(g.nodes):
        raise CycleError("graph has a cycle")
    return out


def node_orders(g: LTGraph, limit: int | None = None) -> Iterator[tuple[int, ...]]:
    """Yield topological orders of the nodes (at most ``limit``)."""
    if has_cycle(g):
        raise CycleError("graph has a cycle")
    indeg = {n.id: 0 for n in g.nodes}
    for _, b in g.arcs:
        indeg[b] += 1
    ids = sorted(indeg)
    order: list[int] = []
    count = 0

    def rec():
        nonlocal count
        if limit is not None and count >= limit:
            return
        if len(order) == len(ids):
            count += 1
            yield tuple(order)
            return
        for x in ids:
            if indeg[x] == 0 and x not in placed:
                placed.add(x)
                order.append(x)
                for s in g.succ[x]:
                    indeg[s] -= 1
                yield from rec()
                for s in g.succ[x]:
                    indeg[s] += 1
                order.pop()
                placed.discard(x)
                if limit is not None and count >= limit:
                    return

    placed: set = set()
    yield from rec()


def linearizations(g: LTGraph, limit: int = 10_000) -> tuple[set[tuple[str, ...]], bool]:
    """All activity sequences the graph admits, up to ``limit`` of them.

    Returns ``(sequences, truncated)``.
    """
    out: set[tuple[str, ...]] = set()
    for order in node_orders(g):
        cells = [c for nid in order for c in g.by_id[nid].cells]
        for combo in itertools.product(*(sorted(c.choices) for c in cells)):
            out.add(combo)
            if len(out) > limit:
                out.discard(combo)
                return out, True
    return out, False


# ---------------------------------------------------------------------------
# fingerprint


def _node_label(n: LTNode):
    cells = tuple(
        ("i", tuple(sorted(c.choices))) if c.inserted else ("o", c.uid, tuple(sorted(c.choices)))
        for c in n.cells
    )
    return (cells, n.soft, tuple(sorted(n.pins)))


def canonical_fingerprint(g: LTGraph, max_permutations: int = 5040):
    """Relabeling-invariant key of the graph's cells, chains, pins and reachability.

    Comparing reachability rather than the literal arc set makes graphs that
    differ only by transitively implied arcs collide, as intended.
    """
    if not g.acyclic:
        closure = {n.id: frozenset(g.succ[n.id]) for n in g.nodes}
    else:
        closure = g.reach
    labels = {n.id: _node_label(n) for n in g.nodes}
    preds: dict[int, set] = {n.id: set() for n in g.nodes}
    for a, ds in closure.items():
        for d in ds:
            preds[d].add(a)
    colors = {k: repr(v) for k, v in labels.items()}
    for _ in range(3):
        new = {
            k: repr((colors[k], sorted(colors[d] for d in closure[k]), sorted(colors[p] for p in preds[k])))
            for k in colors
        }
        if len(set(new.values())) == len(set(colors.values())):
            colors = new
            break
        colors = new
    groups: dict[str, list[int]] = {}
    for k in sorted(colors, key=lambda k: colors[k]):
        groups.setdefault(colors[k], []).append(k)
    ordered_groups = [groups[c] for c in sorted(groups)]

    def encode(order: list[int]):
        index = {k: i for i, k in enumerate(order)}
        return (
            tuple(labels[k] for k in order),
            tuple(sorted((index[a], index[d]) for a in order for d in closure[a])),
        )

    if all(len(grp) == 1 for grp in ordered_groups):
        return encode([grp[0] for grp in ordered_groups])
    best = None
    perms = [list(itertools.permutations(grp)) for grp in ordered_groups]
    for n_tried, combo in enumerate(itertools.product(*perms)):
        if n_tried >= max_permutations:
            break
        enc = encode([k for grp in combo for k in grp])
        if best is None or enc < best:
            best = enc
    return best
