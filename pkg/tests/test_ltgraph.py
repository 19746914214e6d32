import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import sequences
from declarealign.ltgraph import (
    FIRST,
    LAST,
    AddArc,
    Cell,
    CycleError,
    GraphError,
    InsertNode,
    LTGraph,
    LTNode,
    MergeChains,
    PinNode,
    RemoveCell,
    SplitChain,
    SubsetCell,
    apply_fix,
    apply_fixes,
    canonical_fingerprint,
    from_trace,
    has_cycle,
    linearizations,
    topological_sort,
)


def new(*choices):
    return Cell(-1, frozenset(choices), True)


def acts(g):
    return [tuple(sorted(c.choices)) for _, c in topological_sort(g)]


def running_state2():
    g = from_trace("AA")
    return apply_fix(g, InsertNode((new("B", "C"),), preds=frozenset({1})))


def figure7():
    g = from_trace("ADA")
    g = apply_fix(g, RemoveCell(2))
    g = apply_fix(g, InsertNode((new("B", "C"),), preds=frozenset({0}), succs=frozenset({1})))
    return apply_fix(g, InsertNode((new("C"),), preds=frozenset({1})))


# ---------------------------------------------------------------------------
# construction


def test_from_trace_orders_repeats():
    g = from_trace("AA")
    assert [c.uid for _, _, c in g.cells] == [0, 1]
    assert g.arcs == {(0, 1)}


def test_from_empty_trace():
    g = from_trace(())
    assert len(g) == 0 and not g.arcs


def test_from_trace_case234():
    g = from_trace(("Enroll", "Test", "Exam"))
    assert acts(g) == [("Enroll",), ("Test",), ("Exam",)]
    assert g.arcs == {(0, 1), (1, 2)}


# ---------------------------------------------------------------------------
# fixes


def test_insert_branched_after_activation():
    g = running_state2()
    assert acts(g) == [("A",), ("A",), ("B", "C")]
    ins = [c for _, _, c in g.cells if c.inserted]
    assert len(ins) == 1 and ins[0].uid == 2


def test_subset_cell():
    g = running_state2()
    g = apply_fix(g, SubsetCell(2, 0, frozenset({"C"})))
    assert acts(g)[-1] == ("C",)


def test_subset_cell_rejects_empty_or_foreign():
    g = running_state2()
    with pytest.raises(GraphError):
        apply_fix(g, SubsetCell(2, 0, frozenset()))
    with pytest.raises(GraphError):
        apply_fix(g, SubsetCell(2, 0, frozenset({"D"})))


def test_merge_chains():
    g = from_trace("BA")
    g = apply_fix(g, MergeChains(0, 1))
    assert len(g) == 1
    assert [c.uid for c in g.nodes[0].cells] == [0, 1]
    assert not g.arcs


def test_remove_rewires():
    g = apply_fix(running_state2(), RemoveCell(1))
    assert g.arcs == {(0, 2)}
    assert acts(g) == [("A",), ("B", "C")]


def test_remove_inside_chain_keeps_halves_ordered():
    g = apply_fixes(from_trace("ABC"), [MergeChains(0, 1), MergeChains(0, 2)])
    g = apply_fix(g, RemoveCell(0, 1))
    assert acts(g) == [("A",), ("C",)]
    assert len(g) == 2 and not has_cycle(g)


def test_pin_orders_existing_and_later_nodes():
    g = apply_fix(from_trace("AB"), PinNode(1, FIRST))
    assert has_cycle(g)  # B first contradicts A -> B
    g = apply_fix(from_trace("AB"), PinNode(1, LAST))
    g = apply_fix(g, InsertNode((new("C"),)))
    assert (2, 1) in g.arcs
    assert g.pinned(LAST).id == 1


def test_split_undoes_merge():
    g = from_trace("ABC")
    merged = apply_fix(g, MergeChains(0, 1, soft=True))
    split = apply_fix(merged, SplitChain(0, 1))
    assert linearizations(split)[0] == linearizations(g)[0]


@pytest.mark.parametrize(
    "fix", [RemoveCell(9), AddArc(0, 9), SplitChain(0, 1), PinNode(0, "middle"), MergeChains(0, 0)]
)
def test_invalid_fixes(fix):
    with pytest.raises(GraphError):
        apply_fix(from_trace("AB"), fix)


def test_apply_fix_is_pure():
    g = from_trace("AB")
    before = g.debug_text()
    apply_fix(g, AddArc(1, 0))
    assert g.debug_text() == before


# ---------------------------------------------------------------------------
# order queries


def test_cycle_detection():
    g = apply_fix(from_trace("BC"), AddArc(1, 0))
    assert has_cycle(g)
    with pytest.raises(CycleError):
        topological_sort(g)
    assert not has_cycle(LTGraph())


@given(sequences)
def test_from_trace_acyclic_and_sorted(s):
    g = from_trace(s)
    assert not has_cycle(g)
    assert [next(iter(c.choices)) for _, c in topological_sort(g)] == list(s)
    assert linearizations(g) == ({s}, False)


def test_figure7_sort():
    g = figure7()
    assert acts(g) == [("A",), ("B", "C"), ("D",), ("C",)]


def test_linearizations_with_branch():
    assert linearizations(running_state2()) == ({("A", "A", "B"), ("A", "A", "C")}, False)


def test_linearizations_unordered_and_empty():
    g = LTGraph((LTNode(0, (Cell(0, frozenset("A")),)), LTNode(1, (Cell(1, frozenset("B")),))), frozenset(), 2, 2)
    assert linearizations(g)[0] == {("A", "B"), ("B", "A")}
    assert linearizations(LTGraph()) == ({()}, False)


def test_linearizations_truncate():
    nodes = tuple(LTNode(i, (Cell(i, frozenset("AB")),)) for i in range(4))
    out, truncated = linearizations(LTGraph(nodes, frozenset(), 4, 4), limit=5)
    assert truncated and len(out) == 5


# ---------------------------------------------------------------------------
# fingerprints


def _relabel(g, shift):
    nodes = tuple(LTNode(n.id + shift, n.cells, n.soft, n.pins) for n in reversed(g.nodes))
    arcs = frozenset((a + shift, b + shift) for a, b in g.arcs)
    return LTGraph(nodes, arcs, g.next_id + shift, g.next_uid)


def test_fingerprint_relabeling():
    g = figure7()
    assert canonical_fingerprint(g) == canonical_fingerprint(_relabel(g, 10))


def test_fingerprint_distinguishes_order():
    assert canonical_fingerprint(from_trace("AB")) != canonical_fingerprint(from_trace("BA"))


def test_fingerprint_ignores_implied_arcs():
    g = from_trace("ABC")
    assert canonical_fingerprint(g) == canonical_fingerprint(apply_fix(g, AddArc(0, 2)))


# ---------------------------------------------------------------------------
# cost-free fixes only shrink the linearization set

free_fix = st.one_of(
    st.builds(AddArc, st.integers(0, 3), st.integers(0, 3)),
    st.builds(PinNode, st.integers(0, 3), st.sampled_from([FIRST, LAST])),
    st.builds(MergeChains, st.integers(0, 3), st.integers(0, 3), st.booleans()),
)


@given(st.lists(st.sampled_from("ABC"), min_size=4, max_size=4), st.integers(0, 3), free_fix)
def test_free_fixes_shrink(s, branched, fix):
    g = apply_fix(from_trace(s), RemoveCell(branched))  # frees one ordering
    g = apply_fix(g, InsertNode((new("A", "B"),)))
    try:
        h = apply_fix(g, fix)
    except GraphError:
        return
    assume(not has_cycle(h))
    assert linearizations(h)[0] <= linearizations(g)[0]


# ---------------------------------------------------------------------------
# incremental closure

any_fix = st.one_of(
    free_fix,
    st.builds(SubsetCell, st.integers(0, 4), st.just(0), st.sets(st.sampled_from("AB"), min_size=1).map(frozenset)),
    st.builds(
        lambda p, q: InsertNode((new("C"),), frozenset(p), frozenset(q)),
        st.sets(st.integers(0, 4), max_size=2),
        st.sets(st.integers(0, 4), max_size=2),
    ),
)


@given(st.lists(st.sampled_from("ABC"), min_size=3, max_size=5), st.lists(any_fix, max_size=4))
def test_derived_closure_matches_recomputed(s, fixes):
    g = apply_fix(from_trace(s), RemoveCell(1))
    g = apply_fix(g, InsertNode((new("A", "B"),)))
    for f in fixes:
        assert g.acyclic is not None
        try:
            h = apply_fix(g, f)
        except GraphError:
            continue
        fresh = LTGraph(h.nodes, h.arcs, h.next_id, h.next_uid)
        assert h.closure == fresh.closure
        if h.acyclic:
            g = h
