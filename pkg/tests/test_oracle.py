import random

import pytest

from conftest import five_node_fbas, random_fbas, sets_of
from quorumscope import (
    Fbas,
    QuorumSet,
    find_minimal_blocking_sets,
    find_minimal_quorums,
    find_minimal_splitting_sets,
    oracle_enumerate,
)
from quorumscope.errors import UniverseTooLarge

FINDERS = {
    "quorums": find_minimal_quorums,
    "blocking": find_minimal_blocking_sets,
    "splitting": find_minimal_splitting_sets,
}


def test_oracle_five_node():
    f = five_node_fbas()
    assert sets_of(oracle_enumerate(f, "splitting")) == {
        frozenset("02"), frozenset("03"), frozenset("12"), frozenset("014")}
    for kind, finder in FINDERS.items():
        assert sets_of(oracle_enumerate(f, kind)) == sets_of(finder(f))


@pytest.mark.parametrize("seed", range(40))
def test_optimized_matches_oracle_with_inactive(seed):
    f = random_fbas(random.Random(1000 + seed), max_nodes=7, inner_rate=0.3, inactive_rate=0.2)
    for kind, finder in FINDERS.items():
        assert sets_of(finder(f)) == sets_of(oracle_enumerate(f, kind)), kind


def test_oracle_refuses_large_universe():
    nodes = tuple(f"n{i}" for i in range(21))
    f = Fbas(nodes, {v: QuorumSet(11, nodes) for v in nodes})
    with pytest.raises(UniverseTooLarge):
        oracle_enumerate(f, "quorums")


def test_oracle_unknown_kind():
    with pytest.raises(ValueError):
        oracle_enumerate(five_node_fbas(), "bogus")
