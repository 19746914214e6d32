import math

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import running_model
from declarealign.evaluator import violated_activations
from declarealign.heuristic import _embed, bound, estimate, heuristic, merge_actions
from declarealign.ltgraph import Cell, InsertNode, apply_fix, from_trace
from declarealign.model import Constraint, Model
from declarealign.oracle import brute_force_align
from declarealign.repair import propose_actions
from strategies import constraints, graphs

ABC = frozenset("ABC")


def state0_actions():
    g = from_trace("AA")
    acts = violated_activations(g, Constraint.of("Response", "A", ["B", "C"]))
    return {a.site: propose_actions(g, a, alphabet=ABC) for a in acts}, g


def test_running_state0():
    assert heuristic(from_trace("AA"), running_model()) == 1


def test_goal_is_zero():
    g = apply_fix(from_trace("AA"), InsertNode((Cell(-1, frozenset("C"), True),), preds=frozenset({1})))
    assert estimate(g, running_model()).value == 0
    assert heuristic(from_trace("AB"), Model()) == 0


def test_disjoint_removals_add_up():
    m = Model((Constraint.of("NotCoExistence", "A", "B"), Constraint.of("NotCoExistence", "C", "D")))
    assert heuristic(from_trace("ABCD"), m) == 2


def test_merge_overlapping_inserts():
    props, g = state0_actions()
    ins0 = next(x for x in props[0] if x.inserted)
    ins1 = next(x for x in props[1] if x.inserted)
    _, bag, cost = merge_actions(ins0, ins1, g)
    assert cost == 1 and len(bag) == 1


def test_merge_idempotent():
    props, g = state0_actions()
    for x in props[1]:
        assert merge_actions(x, x, g)[2] == x.cost


def test_merge_disjoint_is_none():
    props, g = state0_actions()
    remove0 = next(x for x in props[0] if x.removed)
    g2 = from_trace("A")
    (a,) = violated_activations(g2, Constraint.of("Existence", "B", n=1))
    (insert_b,) = propose_actions(g2, a, alphabet=frozenset("AB"))
    assert merge_actions(remove0, insert_b, g) is None


def test_embed_uses_each_slot_once():
    bag = ((frozenset("BC"), 1.0),)
    items = [(frozenset("B"), 1.0), (frozenset("C"), 1.0)]
    bags = list(_embed(bag, items))
    assert min(sum(k for _, k in b) for b in bags) == 2


def test_dead_activation_is_infinite():
    props, g = state0_actions()
    assert bound(g, {"dead": [], "live": props[1]}, None)[0] == math.inf


def test_cap_falls_back_to_floor():
    m = Model(tuple(Constraint.of("NotCoExistence", a, b) for a, b in ["AB", "CD", "EF", "GH"]))
    g = from_trace("ABCDEFGH")
    exact = estimate(g, m)
    capped = estimate(g, m, max_expansions=1)
    assert exact.exact and not capped.exact
    assert capped.value == 1 <= exact.value == 4


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=200)
@given(graphs(max_nodes=4, max_cells=5), st.lists(constraints(), min_size=1, max_size=3))
def test_sandwich(g, cs):
    m = Model(tuple(cs))
    est = estimate(g, m, alphabet=ABC)
    mins = [min((x.cost for x in acts), default=math.inf) for acts in est.proposals.values()]
    if not mins:
        assert est.value == 0
        return
    assert max(mins) <= est.value + 1e-9
    assert est.value <= sum(mins) + 1e-9
    assert estimate(g, m, alphabet=ABC).value == est.value


@settings(max_examples=150)
@given(st.lists(st.sampled_from("ABC"), max_size=5), st.lists(constraints(), min_size=1, max_size=3))
def test_admissible_at_start(s, cs):
    m = Model(tuple(cs))
    best = brute_force_align(tuple(s), m, max_cost=5)
    h = heuristic(from_trace(s), m)
    if best is not None:
        assert h <= best.cost + 1e-9
