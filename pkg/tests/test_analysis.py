import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import five_node_fbas, random_fbas, sets_of, symmetric_fbas
from quorumscope import (
    Fbas,
    Grouping,
    NodeSet,
    QuorumSet,
    analyze,
    cardinality_stats,
    check_quorum_intersection,
    delete_byzantine,
    deletion_splits,
    detect_symmetric_top_tier,
    find_minimal_blocking_sets,
    find_minimal_quorums,
    find_minimal_splitting_sets,
    has_quorum_intersection,
    is_blocking_set,
    is_quorum,
    is_splitting_literal,
    is_splitting_set,
    lift_to_groups,
    oracle_enumerate,
    reduce_thresholds,
    top_tier,
)
from quorumscope.errors import AnalysisTimeout, NoActiveNodes

fbas_seeds = st.integers(min_value=0, max_value=2**32)


def _fbas(seed, inactive_rate=0.15):
    return random_fbas(random.Random(seed), max_nodes=7, inner_rate=0.3,
                       inactive_rate=inactive_rate)


def F(*labels):
    return frozenset(labels)


# --- five-node example -----------------------------------------------------

def test_five_node_quorums(five):
    u = five.universe
    assert is_quorum(five, NodeSet.of(u, "0123"))
    assert not is_quorum(five, NodeSet.of(u, "012"))
    assert not is_quorum(five, NodeSet.empty(u))
    assert sets_of(find_minimal_quorums(five)) == {F(*"0123"), F(*"0124"), F(*"1234")}


def test_five_node_blocking(five):
    assert sets_of(find_minimal_blocking_sets(five)) == {
        F("1"), F("2"), F("0", "3"), F("0", "4"), F("3", "4")}


def test_five_node_splitting(five):
    u = five.universe
    assert sets_of(find_minimal_splitting_sets(five)) == {
        F("0", "2"), F("0", "3"), F("1", "2"), F("0", "1", "4")}
    assert is_splitting_set(five, NodeSet.of(u, "012"))
    # deleting {1,2} leaves {0} and {3,4} as disjoint quorums
    assert is_splitting_set(five, NodeSet.of(u, "12"))
    assert not is_splitting_set(five, NodeSet.of(u, "1"))


def test_five_node_literal_reading_differs(five):
    u = five.universe
    assert is_splitting_literal(five, NodeSet.of(u, "012"))
    assert not is_splitting_literal(five, NodeSet.of(u, "12"))


def test_five_node_delete_byzantine(five):
    d = delete_byzantine(five, NodeSet.of(five.universe, "012"))
    assert d.nodes == ("3", "4")
    assert d.quorum_sets["3"] == QuorumSet(0, ("4",))
    assert d.quorum_sets["4"] == QuorumSet(0, ("3",))


def test_five_node_intersection(five):
    check = check_quorum_intersection(five)
    assert check.holds and not check.vacuous and check.witness is None


# --- fixture ----------------------------------------------------------------

def test_fixture_families(fixture_fbas):
    report = analyze(fixture_fbas)
    nodes = fixture_fbas.nodes
    assert report.quorum_intersection.holds
    assert len(report.top_tier) == 10
    assert sets_of(report.blocking) == {frozenset(c) for c in itertools.combinations(nodes, 3)}
    assert sets_of(report.splitting) == {frozenset(c) for c in itertools.combinations(nodes, 6)}
    assert report.blocking_stats == cardinality_stats(report.blocking)
    assert (report.blocking_stats.min, report.blocking_stats.mean, report.blocking_stats.max) == (3, 3, 3)
    sym = report.symmetric_top_tier
    assert sym is not None and str(sym.common_qset).startswith("8-of-")
    assert len(sym.common_qset.node_members) == 10


def test_fixture_one_inactive(fixture_fbas):
    f = Fbas(fixture_fbas.nodes, fixture_fbas.quorum_sets, {"Dre": False})
    report = analyze(f)
    assert len(report.top_tier) == 9 and "Dre" not in report.top_tier
    b, s = report.blocking_stats, report.splitting_stats
    assert (b.min, b.mean, b.max, b.count) == (2, 2, 2, 36)
    assert (s.min, s.mean, s.max, s.count) == (7, 7, 7, 36)


def test_fixture_reduced_thresholds(fixture_fbas):
    report = analyze(reduce_thresholds(fixture_fbas, 1))
    assert report.blocking_stats.min == 4 and report.splitting_stats.min == 4


def test_splitting_needs_witnesses_outside(fixture_fbas):
    # with 9 of 10 deleted only one node is left, so no two disjoint quorums
    u = fixture_fbas.universe
    nine = NodeSet.of(u, fixture_fbas.nodes[:9])
    assert not deletion_splits(fixture_fbas, nine)
    assert is_splitting_set(fixture_fbas, nine)


# --- closed forms -----------------------------------------------------------

@pytest.mark.parametrize("n,t", [(n, t) for n in range(2, 9) for t in range(n // 2 + 1, n + 1)])
def test_symmetric_closed_forms(n, t):
    f = symmetric_fbas(n, t)
    nodes = f.nodes

    def subsets(k):
        return {frozenset(c) for c in itertools.combinations(nodes, k)}

    assert sets_of(find_minimal_quorums(f)) == subsets(t)
    assert sets_of(find_minimal_blocking_sets(f)) == subsets(n - t + 1)
    if t < n:
        assert sets_of(find_minimal_splitting_sets(f)) == subsets(2 * t - n)


@pytest.mark.parametrize("n", range(2, 9))
def test_unanimous_threshold_has_no_splitting_set(n):
    # the only quorum is the whole system, so no deletion leaves two
    f = symmetric_fbas(n, n)
    assert not find_minimal_splitting_sets(f).sets
    assert not oracle_enumerate(f, "splitting").sets
    assert not is_splitting_set(f, f.all_nodes())


# --- properties -------------------------------------------------------------

@settings(max_examples=150, deadline=None)
@given(fbas_seeds)
def test_families_are_antichains(seed):
    f = _fbas(seed)
    for fam in (find_minimal_quorums(f), find_minimal_blocking_sets(f),
                find_minimal_splitting_sets(f)):
        assert fam.is_antichain()


@settings(max_examples=150, deadline=None)
@given(fbas_seeds)
def test_blocking_sets_hit_every_quorum(seed):
    f = _fbas(seed)
    quorums = find_minimal_quorums(f).sets
    for b in find_minimal_blocking_sets(f):
        assert is_blocking_set(f, b)
        assert all(b & q for q in quorums)
        for v in b.labels():
            assert not is_blocking_set(f, b - NodeSet.of(f.universe, [v]))


@settings(max_examples=100, deadline=None)
@given(fbas_seeds, st.randoms(use_true_random=False))
def test_splitting_monotone(seed, rng):
    f = _fbas(seed)
    u = f.universe
    for s in find_minimal_splitting_sets(f):
        extra = NodeSet.of(u, [v for v in f.nodes if rng.random() < 0.5])
        assert is_splitting_set(f, s | extra)


@settings(max_examples=100, deadline=None)
@given(fbas_seeds)
def test_intersection_iff_empty_set_not_splitting(seed):
    f = _fbas(seed)
    empty = NodeSet.empty(f.universe)
    holds = has_quorum_intersection(f)
    assert holds == (empty not in find_minimal_splitting_sets(f))
    if holds:
        qs = find_minimal_quorums(f).sets
        assert all(a & b for a, b in itertools.combinations(qs, 2))


@settings(max_examples=60, deadline=None)
@given(fbas_seeds)
def test_upward_closure_matches_oracle(seed):
    f = _fbas(seed)
    minimal = oracle_enumerate(f, "splitting").sets
    for r in range(len(f.nodes) + 1):
        for combo in itertools.combinations(f.nodes, r):
            s = NodeSet.of(f.universe, combo)
            assert is_splitting_set(f, s) == any(m <= s for m in minimal)


@settings(max_examples=60, deadline=None)
@given(fbas_seeds)
def test_top_tier_is_union_of_minimal_quorums(seed):
    f = _fbas(seed)
    union = NodeSet.empty(f.universe)
    for q in find_minimal_quorums(f):
        union = union | q
    assert top_tier(f) == union


# --- top tier, symmetry, literal diagnostic ---------------------------------

def test_dangling_node_outside_top_tier(five):
    qsets = dict(five.quorum_sets)
    qsets["5"] = QuorumSet(2, ("0", "1", "2"))
    f = Fbas(five.nodes + ("5",), qsets)
    assert "5" not in top_tier(f)
    assert detect_symmetric_top_tier(f) is None


def test_symmetric_detection_normalises_self():
    nodes = tuple("abcd")
    with_self = {v: QuorumSet(3, nodes) for v in nodes}
    without_self = {v: QuorumSet(2, tuple(m for m in nodes if m != v)) for v in nodes}
    mixed = {**with_self, "a": without_self["a"]}
    for qsets in (with_self, without_self, mixed):
        desc = detect_symmetric_top_tier(Fbas(nodes, qsets))
        assert desc is not None
        assert desc.common_qset == QuorumSet(3, nodes)


def test_asymmetric_not_detected(five):
    assert detect_symmetric_top_tier(five) is None


def test_literal_on_split_fbas():
    nodes = tuple("abcd")
    qsets = {"a": QuorumSet(1, ("b",)), "b": QuorumSet(1, ("a",)),
             "c": QuorumSet(1, ("d",)), "d": QuorumSet(1, ("c",))}
    f = Fbas(nodes, qsets)
    empty = NodeSet.empty(f.universe)
    assert not has_quorum_intersection(f)
    assert is_splitting_literal(f, empty)
    assert is_splitting_set(f, empty)
    check = check_quorum_intersection(f)
    assert not check.holds and not (check.witness[0] & check.witness[1])


# --- inactive nodes and degenerate inputs -----------------------------------

def test_inactive_never_in_results(five):
    f = Fbas(five.nodes, five.quorum_sets, {"4": False})
    for fam in (find_minimal_quorums(f), find_minimal_blocking_sets(f),
                find_minimal_splitting_sets(f)):
        assert all("4" not in s for s in fam)


def test_no_quorum_is_vacuous(five):
    f = Fbas(five.nodes, five.quorum_sets, {"2": False})
    assert not find_minimal_quorums(f).sets
    blocking = find_minimal_blocking_sets(f)
    assert blocking.vacuous and not blocking.sets
    check = check_quorum_intersection(f)
    assert check.holds and check.vacuous


def test_all_inactive(five):
    with pytest.raises(NoActiveNodes):
        find_minimal_quorums(Fbas(five.nodes, five.quorum_sets, {v: False for v in five.nodes}))


def test_budget_exhaustion():
    f = symmetric_fbas(12, 7)
    with pytest.raises(AnalysisTimeout):
        find_minimal_splitting_sets(f, budget=50)


# --- statistics and lifting -------------------------------------------------

def test_stats_mean_is_exact():
    f = five_node_fbas()
    stats = cardinality_stats(find_minimal_blocking_sets(f))
    assert stats == type(stats)(1, Fraction(8, 5), 2, 5)


def test_lift_identity_grouping_matches_node_level(five):
    g = Grouping.none(five)
    for fam in (find_minimal_blocking_sets(five), find_minimal_splitting_sets(five)):
        assert sets_of(lift_to_groups(fam, g, five)) == sets_of(fam)


def test_lift_merged_pair(five):
    g = Grouping("organisation", {"0": "x", "1": "y", "2": "z", "3": "w", "4": "w"})
    blocking = lift_to_groups(find_minimal_blocking_sets(five), g, five)
    assert sets_of(blocking) == {F("y"), F("z"), F("w")}
    splitting = lift_to_groups(find_minimal_splitting_sets(five), g, five)
    assert sets_of(splitting) == {F("x", "z"), F("x", "w"), F("y", "z")}
    assert splitting.grouping == "organisation"
