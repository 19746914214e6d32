"""DECLARE templates, constraints, models, traces and their sequence semantics.

Every template is decomposed into *parts*: small directional rules (for
example "every A is eventually followed by a B") that the sequence evaluator,
the graph evaluator and the repair catalog all share.  Composite templates
such as Succession are the union of their component parts.
"""

from __future__ import annotations

import csv
import io
import re
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from functools import lru_cache
from typing import Iterable, Sequence

Activity = str

_BAD_NAME = re.compile(r"[()\[\],]")


class ModelParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class LogParseError(ValueError):
    pass


def check_activity(name: str) -> str:
    if not name or name != name.strip() or _BAD_NAME.search(name) or "#" in name:
        raise ValueError(f"invalid activity name {name!r}")
    return name


@dataclass(frozen=True)
class Template:
    name: str
    arity: int
    counted: bool
    direction_class: str  # always-active | forward | backward | bidirectional | choice
    polarity: str  # positive | negative

    @property
    def is_chain(self) -> bool:
        return "Chain" in self.name

    def __str__(self) -> str:
        return self.name


_TABLE = [
    ("Existence", 1, True, "always-active", "positive"),
    ("Participation", 1, False, "always-active", "positive"),
    ("Absence", 1, True, "always-active", "positive"),
    ("AtMostOne", 1, False, "always-active", "positive"),
    ("Exactly", 1, True, "always-active", "positive"),
    ("Init", 1, False, "always-active", "positive"),
    ("End", 1, False, "always-active", "positive"),
    ("Choice", 2, False, "choice", "positive"),
    ("ExclusiveChoice", 2, False, "choice", "positive"),
    ("RespondedExistence", 2, False, "forward", "positive"),
    ("Response", 2, False, "forward", "positive"),
    ("Precedence", 2, False, "backward", "positive"),
    ("AlternateResponse", 2, False, "forward", "positive"),
    ("AlternatePrecedence", 2, False, "backward", "positive"),
    ("ChainResponse", 2, False, "forward", "positive"),
    ("ChainPrecedence", 2, False, "backward", "positive"),
    ("CoExistence", 2, False, "bidirectional", "positive"),
    ("Succession", 2, False, "bidirectional", "positive"),
    ("AlternateSuccession", 2, False, "bidirectional", "positive"),
    ("ChainSuccession", 2, False, "bidirectional", "positive"),
    ("NotRespondedExistence", 2, False, "forward", "negative"),
    ("NotCoExistence", 2, False, "bidirectional", "negative"),
    ("NotResponse", 2, False, "forward", "negative"),
    ("NotPrecedence", 2, False, "backward", "negative"),
    ("NotSuccession", 2, False, "bidirectional", "negative"),
    ("NotChainResponse", 2, False, "forward", "negative"),
    ("NotChainPrecedence", 2, False, "backward", "negative"),
    ("NotChainSuccession", 2, False, "bidirectional", "negative"),
]
TEMPLATES: dict[str, Template] = {row[0]: Template(*row) for row in _TABLE}


# ---------------------------------------------------------------------------
# parts


@dataclass(frozen=True)
class Part:
    """One directional rule of a constraint.

    kind is one of
      count     whole-trace: lo <= #occurrences of ``target`` <= hi
      init/end  whole-trace: first/last activity is in ``target``
      choice    whole-trace: some activity of ``target`` occurs
      xchoice   whole-trace: ``activation`` side or ``target`` side occurs, not both
      exists    each activation has a target at scope any/after/before
      alt       each activation has a target in direction, no activation in between
      chain     each activation is immediately followed/preceded by a target
      not       no target at scope any/after/before of an activation
      notchain  an activation is not immediately followed/preceded by a target
    """

    kind: str
    scope: str = "any"  # any | after | before
    activation: frozenset = frozenset()
    target: frozenset = frozenset()
    lo: int = 0
    hi: int | None = None

    @property
    def whole(self) -> bool:
        return self.kind in ("count", "init", "end", "choice", "xchoice")

    @property
    def negative(self) -> bool:
        return self.kind in ("not", "notchain")

    @property
    def direction(self) -> str:
        return "backward" if self.scope == "before" else "forward"


@dataclass(frozen=True)
class Constraint:
    template: Template
    params: tuple[frozenset, ...]
    n: int | None = None

    def __post_init__(self):
        if len(self.params) != self.template.arity:
            raise ValueError(f"{self.template.name} takes {self.template.arity} activity parameter(s)")
        if any(not p for p in self.params):
            raise ValueError("empty branch set")
        if self.template.counted:
            if self.n is None or self.n < 1:
                raise ValueError(f"{self.template.name} requires a count n >= 1")
        elif self.n is not None:
            raise ValueError(f"{self.template.name} takes no count")

    @classmethod
    def of(cls, template: str, *params, n: int | None = None) -> "Constraint":
        """Convenience constructor: ``Constraint.of("Response", "A", ["B", "C"])``."""
        sets = tuple(frozenset([p]) if isinstance(p, str) else frozenset(p) for p in params)
        return cls(TEMPLATES[template], sets, n)

    @property
    def activities(self) -> frozenset:
        return frozenset().union(*self.params)

    @property
    def parts(self) -> tuple[Part, ...]:
        return _parts(self)

    def __str__(self) -> str:
        args = [str(self.n)] if self.n is not None else []
        for p in self.params:
            members = sorted(p)
            args.append(members[0] if len(members) == 1 else "[" + ", ".join(members) + "]")
        return f"{self.template.name}({', '.join(args)})"


@lru_cache(maxsize=None)
def _parts(c: Constraint) -> tuple[Part, ...]:
    name = c.template.name
    a = c.params[0]
    b = c.params[1] if len(c.params) > 1 else frozenset()
    if name == "Existence":
        return (Part("count", target=a, lo=c.n),)
    if name == "Participation":
        return (Part("count", target=a, lo=1),)
    if name == "Absence":
        return (Part("count", target=a, hi=c.n - 1),)
    if name == "AtMostOne":
        return (Part("count", target=a, hi=1),)
    if name == "Exactly":
        return (Part("count", target=a, lo=c.n, hi=c.n),)
    if name == "Init":
        return (Part("init", target=a),)
    if name == "End":
        return (Part("end", target=a),)
    if name == "Choice":
        return (Part("choice", target=a | b),)
    if name == "ExclusiveChoice":
        return (Part("xchoice", activation=a, target=b),)

    def p(kind, scope, act, tgt):
        return Part(kind, scope, act, tgt)

    table = {
        "RespondedExistence": [p("exists", "any", a, b)],
        "Response": [p("exists", "after", a, b)],
        "Precedence": [p("exists", "before", b, a)],
        "AlternateResponse": [p("alt", "after", a, b)],
        "AlternatePrecedence": [p("alt", "before", b, a)],
        "ChainResponse": [p("chain", "after", a, b)],
        "ChainPrecedence": [p("chain", "before", b, a)],
        "CoExistence": [p("exists", "any", a, b), p("exists", "any", b, a)],
        "Succession": [p("exists", "after", a, b), p("exists", "before", b, a)],
        "AlternateSuccession": [p("alt", "after", a, b), p("alt", "before", b, a)],
        "ChainSuccession": [p("chain", "after", a, b), p("chain", "before", b, a)],
        "NotRespondedExistence": [p("not", "any", a, b)],
        "NotCoExistence": [p("not", "any", a, b), p("not", "any", b, a)],
        "NotResponse": [p("not", "after", a, b)],
        "NotPrecedence": [p("not", "before", b, a)],
        "NotSuccession": [p("not", "after", a, b), p("not", "before", b, a)],
        "NotChainResponse": [p("notchain", "after", a, b)],
        "NotChainPrecedence": [p("notchain", "before", b, a)],
        "NotChainSuccession": [p("notchain", "after", a, b), p("notchain", "before", b, a)],
    }
    return tuple(table[name])


# ---------------------------------------------------------------------------
# sequence semantics

WHOLE = "whole-trace"


@dataclass(frozen=True)
class ActivationStatus:
    position: int | str  # trace index, or WHOLE for always-active rules
    status: str  # fulfilled | violated


def _part_ok_at(part: Part, s: Sequence[str], i: int) -> bool:
    """Whether the activation at position ``i`` of ``s`` is fulfilled."""
    tgt, act = part.target, part.activation
    n = len(s)
    kind, scope = part.kind, part.scope
    if kind == "exists":
        if scope == "any":
            return any(s[j] in tgt for j in range(n) if j != i)
        rng = range(i + 1, n) if scope == "after" else range(i)
        return any(s[j] in tgt for j in rng)
    if kind == "alt":
        # first target in direction, no activation strictly in between
        rng = range(i + 1, n) if scope == "after" else range(i - 1, -1, -1)
        for j in rng:
            if s[j] in tgt:
                return True
            if s[j] in act:
                return False
        return False
    if kind == "chain":
        j = i + 1 if scope == "after" else i - 1
        return 0 <= j < n and s[j] in tgt
    if kind == "not":
        if scope == "any":
            rng = (j for j in range(n) if j != i)
        else:
            rng = range(i + 1, n) if scope == "after" else range(i)
        return not any(s[j] in tgt for j in rng)
    if kind == "notchain":
        j = i + 1 if scope == "after" else i - 1
        return not (0 <= j < n and s[j] in tgt)
    raise ValueError(kind)


def _whole_ok(part: Part, s: Sequence[str]) -> bool:
    if part.kind == "count":
        k = sum(1 for x in s if x in part.target)
        return k >= part.lo and (part.hi is None or k <= part.hi)
    if part.kind == "init":
        return bool(s) and s[0] in part.target
    if part.kind == "end":
        return bool(s) and s[-1] in part.target
    if part.kind == "choice":
        return any(x in part.target for x in s)
    if part.kind == "xchoice":
        has_a = any(x in part.activation for x in s)
        has_b = any(x in part.target for x in s)
        return has_a != has_b
    raise ValueError(part.kind)


def evaluate_part(part: Part, s: Sequence[str]) -> list[ActivationStatus]:
    if part.whole:
        return [ActivationStatus(WHOLE, "fulfilled" if _whole_ok(part, s) else "violated")]
    return [
        ActivationStatus(i, "fulfilled" if _part_ok_at(part, s, i) else "violated")
        for i, x in enumerate(s)
        if x in part.activation
    ]


def evaluate_sequence(c: Constraint, s: Sequence[str]) -> tuple[str, list[ActivationStatus]]:
    """Evaluate ``c`` on a concrete activity sequence.

    Returns ``("satisfied" | "violated", activations)``; composite templates
    list the activations of each component rule in turn.
    """
    acts: list[ActivationStatus] = []
    for part in c.parts:
        acts.extend(evaluate_part(part, s))
    overall = "violated" if any(a.status == "violated" for a in acts) else "satisfied"
    return overall, acts


def satisfies(c: Constraint, s: Sequence[str]) -> bool:
    return evaluate_sequence(c, s)[0] == "satisfied"


# ---------------------------------------------------------------------------
# models and logs


@dataclass(frozen=True)
class Model:
    constraints: tuple[Constraint, ...] = ()
    declared: frozenset = frozenset()

    @property
    def alphabet(self) -> frozenset:
        out = set(self.declared)
        for c in self.constraints:
            out |= c.activities
        return frozenset(out)

    def satisfied_by(self, s: Sequence[str]) -> bool:
        return all(satisfies(c, s) for c in self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)


@dataclass(frozen=True)
class Trace:
    activities: tuple[str, ...] = ()
    id: str | None = None

    def __len__(self) -> int:
        return len(self.activities)

    def __iter__(self):
        return iter(self.activities)

    def __getitem__(self, i):
        return self.activities[i]


@dataclass
class Log:
    traces: list[Trace] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.traces)

    def get(self, trace_id: str) -> Trace:
        for t in self.traces:
            if t.id == trace_id:
                return t
        raise KeyError(trace_id)


_LINE = re.compile(r"^\s*([A-Za-z]+)\s*\((.*)\)\s*$")


def _split_args(body: str, lineno: int) -> list[str | list[str]]:
    args: list[str | list[str]] = []
    i, n = 0, len(body)
    while i < n:
        while i < n and body[i].isspace():
            i += 1
        if i >= n:
            raise ModelParseError(lineno, "trailing comma")
        if body[i] == "[":
            j = body.find("]", i)
            if j < 0:
                raise ModelParseError(lineno, "unclosed '['")
            inner = body[i + 1 : j]
            args.append([x.strip() for x in inner.split(",")])
            i = j + 1
        else:
            j = i
            while j < n and body[j] not in ",[]":
                j += 1
            if j < n and body[j] != ",":
                raise ModelParseError(lineno, f"unexpected {body[j]!r}")
            args.append(body[i:j].strip())
            i = j
        while i < n and body[i].isspace():
            i += 1
        if i < n:
            if body[i] != ",":
                raise ModelParseError(lineno, f"expected ',' got {body[i]!r}")
            i += 1
            if i >= n or not body[i:].strip():
                raise ModelParseError(lineno, "trailing comma")
    return args


def _activity_set(arg, lineno: int) -> frozenset:
    names = arg if isinstance(arg, list) else [arg]
    if not names or names == [""]:
        raise ModelParseError(lineno, "empty branch set")
    out = set()
    for name in names:
        try:
            out.add(check_activity(name))
        except ValueError as exc:
            raise ModelParseError(lineno, str(exc)) from None
    return frozenset(out)


def parse_constraint(line: str, lineno: int = 1) -> Constraint:
    m = _LINE.match(line)
    if not m:
        raise ModelParseError(lineno, f"cannot parse {line.strip()!r}")
    name, body = m.group(1), m.group(2)
    if name not in TEMPLATES:
        raise ModelParseError(lineno, f"unknown template {name!r}")
    tpl = TEMPLATES[name]
    args = _split_args(body, lineno) if body.strip() else []
    n = None
    if tpl.counted:
        if not args or isinstance(args[0], list) or not re.fullmatch(r"\d+", args[0]):
            raise ModelParseError(lineno, f"{name} needs an integer count as first argument")
        n = int(args.pop(0))
        if n < 1:
            raise ModelParseError(lineno, f"{name} count must be >= 1")
    if len(args) != tpl.arity:
        raise ModelParseError(lineno, f"{name} takes {tpl.arity} activity argument(s), got {len(args)}")
    params = tuple(_activity_set(a, lineno) for a in args)
    return Constraint(tpl, params, n)


def parse_model(text: str) -> Model:
    constraints = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            constraints.append(parse_constraint(line, lineno))
    return Model(tuple(constraints))


def serialize_model(model: Model) -> str:
    return "".join(f"{c}\n" for c in model.constraints)


def _parse_ts(value: str, row: int) -> datetime | None:
    value = value.strip()
    if not value:
        return None
    try:
        return datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        raise LogParseError(f"row {row}: unparsable timestamp {value!r}") from None


def parse_log(text: str) -> Log:
    """Parse a CSV event log, or the plain ``id;A,B,C`` one-trace-per-line form."""
    stripped = text.lstrip("﻿")
    first = stripped.splitlines()[0] if stripped.strip() else ""
    if "trace_id" in first or "activity" in first:
        return _parse_csv_log(stripped)
    return _parse_plain_log(stripped)


def _parse_csv_log(text: str) -> Log:
    reader = csv.DictReader(io.StringIO(text))
    fields = [f.strip() for f in (reader.fieldnames or [])]
    missing = {"trace_id", "activity"} - set(fields)
    if missing:
        raise LogParseError(f"missing column(s): {', '.join(sorted(missing))}")
    reader.fieldnames = fields
    events: dict[str, list] = defaultdict(list)
    order: list[str] = []
    for rowno, row in enumerate(reader, start=2):
        tid = (row["trace_id"] or "").strip()
        act = (row["activity"] or "").strip()
        if tid not in events:
            order.append(tid)
        ts = _parse_ts(row.get("timestamp") or "", rowno) if "timestamp" in fields else None
        events[tid].append((ts, len(events[tid]), act))
    traces = []
    for tid in order:
        evs = events[tid]
        if all(e[0] is not None for e in evs):
            evs = sorted(evs, key=lambda e: (e[0], e[1]))
        traces.append(Trace(tuple(e[2] for e in evs), tid))
    return Log(traces)


def _parse_plain_log(text: str) -> Log:
    traces = []
    for k, raw in enumerate(text.splitlines()):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tid, _, body = line.rpartition(";")
        acts = tuple(a.strip() for a in body.split(",") if a.strip())
        traces.append(Trace(acts, tid.strip() or f"trace{k}"))
    return Log(traces)


def model_from_lines(lines: Iterable[str]) -> Model:
    return parse_model("\n".join(lines))
