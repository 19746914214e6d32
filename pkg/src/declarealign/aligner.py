"""A* search over graph states and extraction of the optimal alignment."""

from __future__ import annotations

import heapq
import itertools
import math
import os
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .evaluator import GraphActivation, View, all_violations
from .heuristic import estimate
from .ltgraph import (
    GraphError,
    InsertNode,
    LTGraph,
    MergeChains,
    RemoveCell,
    apply_fix,
    canonical_fingerprint,
    topological_sort,
)
from .model import Model, Trace, evaluate_sequence
from .repair import UNIT_COSTS, Action, CostFunction, select_activation

GAP = None
DEFAULT_TIMEOUT = 300.0


class SoundnessError(AssertionError):
    """An extracted alignment failed validation; indicates an engine bug."""


def default_timeout() -> float:
    env = os.environ.get("DECLAREALIGN_TIMEOUT")
    return float(env) if env else DEFAULT_TIMEOUT


@dataclass(frozen=True)
class SearchConfig:
    early_pruning: bool = True
    chain_preprocessing: bool = True
    grouped_fixes: bool = True
    timeout_seconds: float = field(default_factory=default_timeout)
    cost_function: CostFunction = UNIT_COSTS
    max_cost: float | None = None  # prune states whose f exceeds this budget

    def __post_init__(self):
        if not self.timeout_seconds > 0:
            raise ValueError("timeout must be positive")


@dataclass
class SearchStats:
    expanded_states: int = 0
    discovered_states: int = 0
    elapsed: float = 0.0
    timed_out: bool = False

    @property
    def time_ms(self) -> float:
        return self.elapsed * 1000.0


@dataclass(frozen=True)
class Move:
    kind: str  # "synchronous" | "log" | "model"
    log: str | None
    model: str | None

    def __post_init__(self):
        if self.kind == "synchronous":
            ok = self.log is not None and self.log == self.model
        elif self.kind == "log":
            ok = self.log is not None and self.model is None
        elif self.kind == "model":
            ok = self.model is not None and self.log is None
        else:
            ok = False
        if not ok:
            raise ValueError(f"illegal move {self!r}")


@dataclass(frozen=True)
class Alignment:
    moves: tuple[Move, ...]
    cost: float

    def log_projection(self) -> tuple[str, ...]:
        return tuple(m.log for m in self.moves if m.log is not None)

    def model_projection(self) -> tuple[str, ...]:
        return tuple(m.model for m in self.moves if m.model is not None)

    def counts(self) -> dict[str, int]:
        out = {"synchronous": 0, "log": 0, "model": 0}
        for m in self.moves:
            out[m.kind] += 1
        return out


def alignment_cost(moves: Iterable[Move], cf: CostFunction) -> float:
    total = 0.0
    for m in moves:
        if m.kind == "log":
            total += cf.log(m.log)
        elif m.kind == "model":
            total += cf.model(m.model)
    return total


@dataclass(eq=False)
class SearchState:
    graph: LTGraph
    cost: float
    heuristic: float
    violated: list[GraphActivation]
    will_fix: GraphActivation | None
    parent: "SearchState | None" = None
    action: Action | None = None
    proposals: Mapping[tuple, Sequence[Action]] = field(default_factory=dict, repr=False)
    pending: tuple = ()  # remaining fixes of a decomposed action (grouped fixes off)
    horizon: float | None = None  # cost once the pending fixes are applied

    @property
    def depth(self) -> float:
        """Cost used for tie-breaking: a forced chain ranks like its whole action."""
        return self.horizon if self.pending and self.horizon is not None else self.cost

    @property
    def f(self) -> float:
        return self.cost + self.heuristic

    @property
    def is_goal(self) -> bool:
        return not self.violated and not self.pending

    def path(self) -> list["SearchState"]:
        out, s = [], self
        while s is not None:
            out.append(s)
            s = s.parent
        return out[::-1]


@dataclass
class AlignResult:
    status: str  # "ok" | "timeout" | "unsat"
    alignment: Alignment | None
    stats: SearchStats
    goal: SearchState | None = None

    @property
    def cost(self) -> float | None:
        return self.alignment.cost if self.alignment else None


# ---------------------------------------------------------------------------
# preprocessing


def _keys(g: LTGraph, m: Model) -> set:
    return {a.key for a in all_violations(g, m)}


def preprocess_chains(g: LTGraph, m: Model) -> LTGraph:
    """Softly merge adjacent trace positions that already satisfy a chain rule."""
    chain_parts = [
        p for c in m.constraints if c.template.is_chain for p in c.parts if p.kind in ("chain", "notchain")
    ]
    if not chain_parts:
        return g
    acts = {c.uid: next(iter(c.choices)) for _, _, c in g.cells}
    n = len(acts)
    base = _keys(g, m)
    for i in range(n - 1):
        a, b = acts[i], acts[i + 1]
        fits = False
        for p in chain_parts:
            site, other = (a, b) if p.scope == "after" else (b, a)
            if site in p.activation and ((other in p.target) == (p.kind == "chain")):
                fits = True
                break
        if not fits:
            continue
        front, back = g.cell_site[i][0], g.cell_site[i + 1][0]
        if front == back:
            continue
        trial = apply_fix(g, MergeChains(front, back, soft=True))
        if not trial.acyclic:
            continue
        keys = _keys(trial, m)
        if keys <= base:
            g, base = trial, keys
    return g


# ---------------------------------------------------------------------------
# search


class _Search:
    def __init__(self, t: Trace, m: Model, cfg: SearchConfig, observer=None):
        self.t, self.m, self.cfg = t, m, cfg
        self.observer = observer
        self.cf = cfg.cost_function
        self.alphabet = m.alphabet
        self.stats = SearchStats()

    def make_state(
        self, g: LTGraph, cost: float, parent=None, action=None, pending=(), horizon=None
    ) -> SearchState:
        if pending:
            # inside a forced chain the parent's bound, minus what was just
            # paid, stays admissible; the graph is only judged at the end
            h = max(0.0, parent.heuristic - (cost - parent.cost))
            return SearchState(g, cost, h, parent.violated, parent.will_fix, parent, action, {}, pending, horizon)
        est = estimate(g, self.m, self.cf, alphabet=self.alphabet)
        will_fix = None
        if est.violated:
            pos = {c.uid: i for i, (_, c) in enumerate(topological_sort(g))}
            will_fix = select_activation(est.violated, est.proposals, pos)
        return SearchState(g, cost, est.value, est.violated, will_fix, parent, action, est.proposals, pending)

    def children(self, s: SearchState) -> list[tuple[LTGraph, float, Action, tuple, float]]:
        """Successors as ``(graph, step cost, action, fixes still pending, horizon)``."""
        if s.pending:
            fix, rest = s.pending[0], s.pending[1:]
            g2 = apply_fix(s.graph, fix)
            if not g2.acyclic:
                return []
            cost = self.fix_cost(s.graph, fix)
            return [(g2, cost, Action((fix,), cost, s.will_fix, result=g2), rest, s.horizon)]
        out = []
        for a in s.proposals.get(s.will_fix.key, []):
            if a.result is None or not a.result.acyclic:
                continue
            if self.cfg.grouped_fixes or len(a.fixes) == 1:
                out.append((a.result, a.cost, a, (), None))
                continue
            # ablation: walk the action one fix at a time
            fix = a.fixes[0]
            g2 = apply_fix(s.graph, fix)
            if g2.acyclic:
                cost = self.fix_cost(s.graph, fix)
                out.append((g2, cost, Action((fix,), cost, s.will_fix, result=g2), a.fixes[1:], s.cost + a.cost))
        return out

    def fix_cost(self, g: LTGraph, fix) -> float:
        if isinstance(fix, RemoveCell):
            cell = g.by_id[fix.node].cells[fix.index]
            return 0.0 if cell.inserted else self.cf.log(next(iter(cell.choices)))
        if isinstance(fix, InsertNode):
            return sum(min(self.cf.model(x) for x in c.choices) for c in fix.cells)
        return 0.0

    def run(self) -> AlignResult:
        cfg, stats = self.cfg, self.stats
        start = time.monotonic()
        g0 = LTGraph.from_trace(self.t)
        if cfg.chain_preprocessing:
            g0 = preprocess_chains(g0, self.m)
        root = self.make_state(g0, 0.0)
        stats.discovered_states = 1
        tie = itertools.count()
        heap: list = []
        best: dict = {}

        def push(s: SearchState, fp=None) -> None:
            fp = fp if fp is not None else (canonical_fingerprint(s.graph), s.pending)
            if best.get(fp, math.inf) <= s.cost:
                return
            best[fp] = s.cost
            heapq.heappush(heap, (s.f, -s.depth, next(tie), fp, s))

        if not self.pruned(root):
            push(root)
        while heap:
            if time.monotonic() - start > cfg.timeout_seconds:
                stats.timed_out = True
                stats.elapsed = time.monotonic() - start
                return AlignResult("timeout", None, stats)
            _, _, _, fp, s = heapq.heappop(heap)
            if best.get(fp, math.inf) < s.cost:
                continue  # superseded by a cheaper rediscovery
            stats.expanded_states += 1
            if self.observer is not None:
                self.observer(s)
            if s.is_goal:
                alignment = extract_alignment(s, self.t, self.cf, self.m)
                stats.elapsed = time.monotonic() - start
                return AlignResult("ok", alignment, stats, s)
            for g2, cost, action, pending, horizon in self.children(s):
                fp2 = (canonical_fingerprint(g2), pending)
                if best.get(fp2, math.inf) <= s.cost + cost:
                    continue  # known at equal or lower cost
                child = self.make_state(g2, s.cost + cost, s, action, pending, horizon)
                if self.pruned(child):
                    continue
                stats.discovered_states += 1
                push(child, fp2)
        stats.elapsed = time.monotonic() - start
        return AlignResult("unsat", None, stats)

    def pruned(self, s: SearchState) -> bool:
        dead = not s.pending and (is_dead_end(s, s.proposals) or math.isinf(s.heuristic))
        if dead:
            return self.cfg.early_pruning
        return self.cfg.max_cost is not None and s.f > self.cfg.max_cost + 1e-9


def is_dead_end(s: SearchState, proposals: Mapping[tuple, Sequence[Action]]) -> bool:
    for a in s.violated:
        if not any(x.feasible for x in proposals.get(a.key, ())):
            return True
    return False


def expand(s: SearchState, t: Trace, m: Model, cfg: SearchConfig = SearchConfig()) -> list[SearchState]:
    """Children of ``s`` (dead ends included); mainly for inspection and tests."""
    search = _Search(t, m, cfg)
    if s.will_fix is None:
        return []
    return [search.make_state(g2, s.cost + c, s, a, p, h) for g2, c, a, p, h in search.children(s)]


def initial_state(t: Trace, m: Model, cfg: SearchConfig = SearchConfig()) -> SearchState:
    g0 = LTGraph.from_trace(t)
    if cfg.chain_preprocessing:
        g0 = preprocess_chains(g0, m)
    return _Search(t, m, cfg).make_state(g0, 0.0)


def align(
    t: Trace | Sequence[str], m: Model, cfg: SearchConfig | None = None, observer=None
) -> AlignResult:
    """Optimal alignment of ``t`` against ``m``.

    ``observer`` is called with every state taken off the open list.
    """
    cfg = cfg or SearchConfig()
    return _Search(tuple(t), m, cfg, observer).run()


# ---------------------------------------------------------------------------
# extraction


def resolve_choice(choices: frozenset, cf: CostFunction) -> str:
    """Cheapest member; ties go to the lexicographically greatest name."""
    return min(choices, key=lambda a: (cf.model(a), [-ord(ch) for ch in a] + [1]))


def extract_alignment(
    goal: SearchState | LTGraph, t: Trace | Sequence[str], cf: CostFunction = UNIT_COSTS, m: Model | None = None
) -> Alignment:
    g = goal.graph if isinstance(goal, SearchState) else goal
    trace = tuple(t)
    moves: list[Move] = []
    cursor = 0
    for _, cell in topological_sort(g):
        if cell.inserted:
            moves.append(Move("model", GAP, resolve_choice(cell.choices, cf)))
            continue
        if cell.uid < cursor or cell.uid >= len(trace):
            raise SoundnessError(f"original cell {cell.uid} out of trace order")
        while cursor < cell.uid:
            moves.append(Move("log", trace[cursor], GAP))
            cursor += 1
        (act,) = cell.choices
        if act != trace[cursor]:
            raise SoundnessError(f"cell {cell.uid} does not match the trace")
        moves.append(Move("synchronous", act, act))
        cursor += 1
    while cursor < len(trace):
        moves.append(Move("log", trace[cursor], GAP))
        cursor += 1
    alignment = Alignment(tuple(moves), alignment_cost(moves, cf))
    problems = validate_alignment(alignment, trace, m, cf)
    if isinstance(goal, SearchState) and not math.isclose(alignment.cost, goal.cost, abs_tol=1e-9):
        problems.append(f"cost {alignment.cost} differs from search cost {goal.cost}")
    if problems:
        raise SoundnessError("; ".join(problems))
    return alignment


def validate_alignment(
    alignment: Alignment, t: Sequence[str], m: Model | None, cf: CostFunction = UNIT_COSTS
) -> list[str]:
    """Return the list of validity failures (empty when valid)."""
    problems = []
    if alignment.log_projection() != tuple(t):
        problems.append("log projection differs from the trace")
    if m is not None:
        seq = alignment.model_projection()
        for c in m.constraints:
            if evaluate_sequence(c, seq)[0] != "satisfied":
                problems.append(f"model projection violates {c}")
    if not math.isclose(alignment_cost(alignment.moves, cf), alignment.cost, abs_tol=1e-9):
        problems.append("reported cost does not match the moves")
    return problems


__all__ = [
    "Alignment",
    "AlignResult",
    "Move",
    "SearchConfig",
    "SearchState",
    "SearchStats",
    "SoundnessError",
    "align",
    "expand",
    "extract_alignment",
    "initial_state",
    "is_dead_end",
    "preprocess_chains",
    "validate_alignment",
]
