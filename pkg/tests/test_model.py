import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import DATA, LETTERS, hospital_model, sequences
from declarealign.model import (
    TEMPLATES,
    Constraint,
    LogParseError,
    ModelParseError,
    evaluate_sequence,
    parse_log,
    parse_model,
    satisfies,
    serialize_model,
)


def sat(name, *params, s, n=None):
    return satisfies(Constraint.of(name, *params, n=n), s)


# ---------------------------------------------------------------------------
# parsing


def test_figure1_model():
    m = hospital_model()
    assert len(m) == 5
    assert m.alphabet == {"ANC", "L", "ERT", "RB", "IVA"}
    assert str(m.constraints[3]) == "ChainResponse(IVA, RB)"


def test_empty_model():
    m = parse_model("")
    assert len(m) == 0 and m.alphabet == frozenset()


def test_branch_parameters():
    (c,) = parse_model("Response(A, [B, C])").constraints
    assert c.params == (frozenset({"A"}), frozenset({"B", "C"}))


def test_comments_and_blank_lines():
    m = parse_model("# header\n\nExistence(2, A)  # two\n")
    assert [str(c) for c in m.constraints] == ["Existence(2, A)"]


@pytest.mark.parametrize(
    "text",
    ["Foo(A)", "Response(A)", "Existence(A)", "Response(A, [])", "Existence(0, A)", "Init(A, B)", "Response A B"],
)
def test_model_errors(text):
    with pytest.raises(ModelParseError, match="line 1"):
        parse_model(text)


def test_every_template_parses():
    for name, t in TEMPLATES.items():
        args = (["2"] if t.counted else []) + ["A", "B"][: t.arity]
        (c,) = parse_model(f"{name}({', '.join(args)})").constraints
        assert c.template is t


constraints = st.builds(
    lambda name, a, b, n: Constraint.of(name, *[a, b][: TEMPLATES[name].arity], n=n if TEMPLATES[name].counted else None),
    st.sampled_from(sorted(TEMPLATES)),
    st.sets(st.sampled_from(LETTERS), min_size=1, max_size=2),
    st.sets(st.sampled_from(LETTERS), min_size=1, max_size=2),
    st.integers(1, 3),
)


@given(st.lists(constraints, max_size=5))
def test_serialize_round_trip(cs):
    from declarealign.model import Model

    m = Model(tuple(cs))
    assert parse_model(serialize_model(m)) == m


# ---------------------------------------------------------------------------
# logs


def test_table1_case234():
    text = (
        "trace_id,activity,timestamp\n"
        "Case234,Enroll,2023-09-01 22:16:29\n"
        "Case675,Class,2023-11-01 04:10:07\n"
        "Case234,Test,2023-11-15 02:09:48\n"
        "Case675,Exam,2023-12-13 07:24:41\n"
        "Case234,Exam,2024-01-19 06:42:33\n"
    )
    log = parse_log(text)
    assert log.get("Case234").activities == ("Enroll", "Test", "Exam")
    assert log.get("Case675").activities == ("Class", "Exam")


def test_header_only_log():
    assert len(parse_log("trace_id,activity,timestamp\n")) == 0


def test_interleaved_ids_sorted_by_timestamp():
    text = (
        "trace_id,activity,timestamp\n"
        "x,B,2024-01-02\n"
        "y,C,2024-01-01\n"
        "x,A,2024-01-01\n"
        "y,D,2024-01-03\n"
    )
    log = parse_log(text)
    assert [t.id for t in log.traces] == ["x", "y"]
    assert log.get("x").activities == ("A", "B")
    assert log.get("y").activities == ("C", "D")


def test_missing_timestamps_keep_file_order():
    log = parse_log((DATA / "running.csv").read_text())
    assert log.get("r1").activities == ("A", "A")


def test_plain_log_format():
    log = parse_log("t1;A,B\nt2;C\n")
    assert [(t.id, t.activities) for t in log.traces] == [("t1", ("A", "B")), ("t2", ("C",))]


@pytest.mark.parametrize(
    "text", ["trace_id,timestamp\nx,2024-01-01\n", "trace_id,activity,timestamp\nx,A,notadate\n"]
)
def test_log_errors(text):
    with pytest.raises(LogParseError):
        parse_log(text)


# ---------------------------------------------------------------------------
# sequence semantics


def test_running_example_activations():
    status, acts = evaluate_sequence(Constraint.of("Response", "A", ["B", "C"]), ("A", "A"))
    assert status == "violated"
    assert [(a.position, a.status) for a in acts] == [(0, "violated"), (1, "violated")]


def test_vacuous_satisfaction():
    status, acts = evaluate_sequence(Constraint.of("Response", "A", "B"), ())
    assert status == "satisfied" and acts == []


def test_not_coexistence_both_present():
    assert not sat("NotCoExistence", "A", "B", s=("A", "B"))


def test_figure1_model_on_aligned_trace():
    for c in hospital_model().constraints:
        assert satisfies(c, ("ANC", "L", "ERT", "RB")), c


def test_absence_counts_below_n():
    assert sat("Absence", "A", n=2, s=("A",))
    assert not sat("Absence", "A", n=2, s=("A", "A"))
    assert not sat("Absence", "A", n=1, s=("A",))


# ---------------------------------------------------------------------------
# independent definitions of every template over single-letter parameters

def _idx(s, x):
    return [i for i, y in enumerate(s) if y == x]


def _next(s, i, x, stop):
    for j in range(i + 1, len(s)):
        if s[j] == x:
            return True
        if s[j] == stop:
            return False
    return False


def _prev(s, i, x, stop):
    for j in range(i - 1, -1, -1):
        if s[j] == x:
            return True
        if s[j] == stop:
            return False
    return False


def _elsewhere(s, i, x):
    """Whether ``x`` occurs at a position other than ``i`` (targets are other events)."""
    return any(e == x for j, e in enumerate(s) if j != i)


DEFINITIONS = {
    "Existence": lambda s, a, b, n: s.count(a) >= n,
    "Participation": lambda s, a, b, n: a in s,
    "Absence": lambda s, a, b, n: s.count(a) < n,
    "AtMostOne": lambda s, a, b, n: s.count(a) <= 1,
    "Exactly": lambda s, a, b, n: s.count(a) == n,
    "Init": lambda s, a, b, n: bool(s) and s[0] == a,
    "End": lambda s, a, b, n: bool(s) and s[-1] == a,
    "Choice": lambda s, a, b, n: a in s or b in s,
    "ExclusiveChoice": lambda s, a, b, n: (a in s) != (b in s),
    "RespondedExistence": lambda s, a, b, n: all(_elsewhere(s, i, b) for i in _idx(s, a)),
    "Response": lambda s, a, b, n: all(b in s[i + 1 :] for i in _idx(s, a)),
    "Precedence": lambda s, a, b, n: all(a in s[:i] for i in _idx(s, b)),
    "AlternateResponse": lambda s, a, b, n: all(_next(s, i, b, a) for i in _idx(s, a)),
    "AlternatePrecedence": lambda s, a, b, n: all(_prev(s, i, a, b) for i in _idx(s, b)),
    "ChainResponse": lambda s, a, b, n: all(i + 1 < len(s) and s[i + 1] == b for i in _idx(s, a)),
    "ChainPrecedence": lambda s, a, b, n: all(i > 0 and s[i - 1] == a for i in _idx(s, b)),
    "CoExistence": lambda s, a, b, n: all(_elsewhere(s, i, b) for i in _idx(s, a))
    and all(_elsewhere(s, i, a) for i in _idx(s, b)),
    "NotRespondedExistence": lambda s, a, b, n: not any(_elsewhere(s, i, b) for i in _idx(s, a)),
    "NotCoExistence": lambda s, a, b, n: not any(_elsewhere(s, i, b) for i in _idx(s, a)),
    "NotResponse": lambda s, a, b, n: all(b not in s[i + 1 :] for i in _idx(s, a)),
    "NotPrecedence": lambda s, a, b, n: all(a not in s[:i] for i in _idx(s, b)),
    "NotSuccession": lambda s, a, b, n: all(b not in s[i + 1 :] for i in _idx(s, a)),
    "NotChainResponse": lambda s, a, b, n: all(not (i + 1 < len(s) and s[i + 1] == b) for i in _idx(s, a)),
    "NotChainPrecedence": lambda s, a, b, n: all(not (i > 0 and s[i - 1] == a) for i in _idx(s, b)),
}
DEFINITIONS["Succession"] = lambda s, a, b, n: DEFINITIONS["Response"](s, a, b, n) and DEFINITIONS["Precedence"](
    s, a, b, n
)
DEFINITIONS["AlternateSuccession"] = lambda s, a, b, n: DEFINITIONS["AlternateResponse"](
    s, a, b, n
) and DEFINITIONS["AlternatePrecedence"](s, a, b, n)
DEFINITIONS["ChainSuccession"] = lambda s, a, b, n: DEFINITIONS["ChainResponse"](s, a, b, n) and DEFINITIONS[
    "ChainPrecedence"
](s, a, b, n)
DEFINITIONS["NotChainSuccession"] = DEFINITIONS["NotChainResponse"]


def test_definitions_cover_all_templates():
    assert set(DEFINITIONS) == set(TEMPLATES)


@given(
    st.sampled_from(sorted(TEMPLATES)),
    st.sampled_from("ABC"),
    st.sampled_from("ABC"),
    st.integers(1, 3),
    st.lists(st.sampled_from("ABCD"), max_size=8).map(tuple),
)
def test_templates_match_definitions(name, a, b, n, s):
    t = TEMPLATES[name]
    c = Constraint.of(name, *[a, b][: t.arity], n=n if t.counted else None)
    assert satisfies(c, s) == DEFINITIONS[name](s, a, b, n)


# ---------------------------------------------------------------------------
# composite equivalences

branch = st.sets(st.sampled_from(LETTERS), min_size=1, max_size=2)

COMPOSITES = [
    ("Succession", "Response", "Precedence"),
    ("AlternateSuccession", "AlternateResponse", "AlternatePrecedence"),
    ("ChainSuccession", "ChainResponse", "ChainPrecedence"),
    ("NotChainSuccession", "NotChainResponse", "NotChainPrecedence"),
]


@pytest.mark.parametrize("whole,left,right", COMPOSITES)
@given(a=branch, b=branch, s=sequences)
def test_composite_equivalence(whole, left, right, a, b, s):
    assert sat(whole, a, b, s=s) == (sat(left, a, b, s=s) and sat(right, a, b, s=s))


@given(a=branch, b=branch, s=sequences)
def test_coexistence_equivalence(a, b, s):
    assert sat("CoExistence", a, b, s=s) == (
        sat("RespondedExistence", a, b, s=s) and sat("RespondedExistence", b, a, s=s)
    )


@given(a=branch, n=st.integers(1, 4), s=sequences)
def test_count_equivalences(a, n, s):
    assert sat("Participation", a, s=s) == sat("Existence", a, n=1, s=s)
    assert sat("AtMostOne", a, s=s) == sat("Absence", a, n=2, s=s)
    assert sat("Exactly", a, n=n, s=s) == (sat("Existence", a, n=n, s=s) and sat("Absence", a, n=n + 1, s=s))
