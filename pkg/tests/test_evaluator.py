import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import running_model
from declarealign.evaluator import View, all_violations, is_goal, violated_activations
from declarealign.ltgraph import (
    Cell,
    CycleError,
    InsertNode,
    LTGraph,
    MergeChains,
    SubsetCell,
    AddArc,
    apply_fix,
    from_trace,
    linearizations,
)
from declarealign.model import Constraint, Model, evaluate_sequence, satisfies
from strategies import constraints, graphs

RESPONSE = Constraint.of("Response", "A", ["B", "C"])
PRECEDENCE = Constraint.of("Precedence", "C", "B")


def state2():
    return apply_fix(from_trace("AA"), InsertNode((Cell(-1, frozenset("BC"), True),), preds=frozenset({1})))


def test_running_state0_violations():
    acts = violated_activations(from_trace("AA"), RESPONSE)
    assert [a.site for a in acts] == [0, 1]


def test_precedence_vacuous_without_target():
    assert violated_activations(from_trace("AA"), PRECEDENCE) == []


def test_branch_member_triggers_precedence():
    (a,) = violated_activations(state2(), PRECEDENCE)
    assert a.site == 2 and a.triggering == {"B"}


def test_goal_states():
    state3 = apply_fix(state2(), SubsetCell(2, 0, frozenset("C")))
    assert is_goal(state3, running_model())
    assert not is_goal(state2(), running_model())
    assert not is_goal(from_trace("AA"), running_model())
    assert is_goal(LTGraph(), Model())


def test_unordered_target_does_not_certify_response():
    g = apply_fix(from_trace("A"), InsertNode((Cell(-1, frozenset("B"), True),)))
    assert violated_activations(g, Constraint.of("Response", "A", "B"))
    g = apply_fix(g, AddArc(0, 1))
    assert not violated_activations(g, Constraint.of("Response", "A", "B"))


def test_chain_rules_trust_only_merged_neighbours():
    c = Constraint.of("ChainResponse", "A", "B")
    g = from_trace("AB")
    assert violated_activations(g, c)
    assert not violated_activations(apply_fix(g, MergeChains(0, 1)), c)


def test_cyclic_graph_rejected():
    with pytest.raises(CycleError):
        View(apply_fix(from_trace("AB"), AddArc(1, 0)))


# ---------------------------------------------------------------------------
# properties

# Chain rules and Init/End are stricter on graphs than on sequences: an
# unmerged successor or an unpinned first node never certifies them.
STRICT = {"ChainResponse", "ChainPrecedence", "ChainSuccession", "Init", "End"}


@given(st.lists(st.sampled_from("ABC"), max_size=7).map(tuple), constraints())
def test_agrees_with_sequences_on_total_orders(s, c):
    graph_sites = {a.site for a in violated_activations(from_trace(s), c) if a.site is not None}
    _, acts = evaluate_sequence(c, s)
    seq_sites = {a.position for a in acts if a.status == "violated" and a.position != "whole-trace"}
    if c.template.name in STRICT:
        assert seq_sites <= graph_sites
    else:
        assert graph_sites == seq_sites
        assert bool(violated_activations(from_trace(s), c)) == (not satisfies(c, s))


@settings(max_examples=400)
@given(graphs(), constraints())
def test_soundness(g, c):
    if violated_activations(g, c):
        return
    seqs, truncated = linearizations(g, limit=50_000)
    assert not truncated
    for s in seqs:
        assert satisfies(c, s), (c, s, g.debug_text())


@given(graphs(), st.lists(constraints(), min_size=1, max_size=3))
def test_all_violations_concatenates(g, cs):
    m = Model(tuple(cs))
    expected = [a for i, c in enumerate(cs) for a in violated_activations(g, c, i)]
    assert all_violations(g, m) == expected
    for a in expected:
        cell = View(g).cells.get(a.site)
        if cell is not None:
            assert a.triggering and a.triggering <= cell.choices
