"""
A five-node FBAS, step by step
==============================

Quorums, blocking sets and splitting sets of a small system where node 0
trusts {1, 2}, node 1 wants two of {0, 2, 3}, and nodes 2-4 each want three
of the others.
"""

from quorumscope import (
    Fbas,
    NodeSet,
    QuorumSet,
    delete_byzantine,
    find_minimal_blocking_sets,
    find_minimal_quorums,
    find_minimal_splitting_sets,
    is_quorum,
    is_splitting_literal,
    is_splitting_set,
    oracle_enumerate,
)

fbas = Fbas(
    ("0", "1", "2", "3", "4"),
    {
        "0": QuorumSet(2, ("1", "2")),
        "1": QuorumSet(2, ("0", "2", "3")),
        "2": QuorumSet(3, ("0", "1", "3", "4")),
        "3": QuorumSet(3, ("0", "1", "2", "4")),
        "4": QuorumSet(3, ("0", "1", "2", "3")),
    },
)
u = fbas.universe


def show(title, family):
    print(f"{title}: " + "  ".join("{" + ",".join(s) + "}" for s in family.as_labels()))


# {0,1,2,3} can agree on its own; {0,1,2} cannot, because 2 needs a third peer.
print("is_quorum({0,1,2,3}) =", is_quorum(fbas, NodeSet.of(u, "0123")))
print("is_quorum({0,1,2})   =", is_quorum(fbas, NodeSet.of(u, "012")))

show("minimal quorums ", find_minimal_quorums(fbas))
show("minimal blocking", find_minimal_blocking_sets(fbas))
show("minimal splitting", find_minimal_splitting_sets(fbas))

# Splitting sets are found by deleting nodes and lowering thresholds.
# Deleting {1,2} leaves 0 with nothing left to wait for and {3,4} agreeing
# among themselves: two quorums that never meet.
rest = delete_byzantine(fbas, NodeSet.of(u, "12"))
for v in rest.nodes:
    print(f"after deleting {{1,2}}: {v} -> {rest.quorum_sets[v]}")

# The literal "holds the overlap of two quorums" test disagrees on {1,2}.
for s in ("012", "12"):
    print(f"{{{','.join(s)}}}: deletion={is_splitting_set(fbas, NodeSet.of(u, s))} "
          f"literal={is_splitting_literal(fbas, NodeSet.of(u, s))}")

# Every family is cross-checked against brute force over all 32 subsets.
for kind, finder in (("quorums", find_minimal_quorums), ("blocking", find_minimal_blocking_sets),
                     ("splitting", find_minimal_splitting_sets)):
    assert set(finder(fbas).sets) == set(oracle_enumerate(fbas, kind).sets), kind
print("oracle agrees")
