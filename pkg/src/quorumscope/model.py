"""FBAS data model: quorum sets, node sets, groupings and slice satisfaction.

Everything here is immutable; transformations return fresh objects.  Node
sets are bitsets (plain Python ints) over the dense index of an ordered
universe of labels, which is what makes the analysis cheap.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from .errors import (
    DepthExceeded,
    DuplicateMember,
    NoActiveNodes,
    ThresholdOutOfRange,
    UnknownNode,
)

MAX_QSET_DEPTH = 16

GROUPING_KINDS = ("none", "organisation", "isp", "country")


class ThresholdClampWarning(UserWarning):
    """A threshold reduction hit zero and was clamped."""


# ---------------------------------------------------------------------------
# node sets
# ---------------------------------------------------------------------------

class Universe:
    """Ordered, duplicate-free tuple of labels with a label -> index map."""

    __slots__ = ("labels", "index")

    def __init__(self, labels: Iterable[str]):
        self.labels = tuple(labels)
        self.index = {label: i for i, label in enumerate(self.labels)}
        if len(self.index) != len(self.labels):
            raise ValueError("universe labels must be unique")

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if self is other:
            return True
        return isinstance(other, Universe) and self.labels == other.labels

    def __hash__(self):
        return hash(self.labels)

    def __repr__(self):
        return f"Universe({list(self.labels)!r})"

    @property
    def full_mask(self) -> int:
        return (1 << len(self.labels)) - 1


def iter_bits(mask: int) -> Iterator[int]:
    """Yield set bit positions in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class NodeSet:
    """An exact set of labels drawn from one :class:`Universe`."""

    __slots__ = ("bits", "universe")

    def __init__(self, bits: int, universe: Universe):
        if bits < 0 or bits >> len(universe):
            raise ValueError("bits outside universe")
        self.bits = bits
        self.universe = universe

    @classmethod
    def of(cls, universe: Universe, labels: Iterable[str]) -> "NodeSet":
        bits = 0
        for label in labels:
            try:
                bits |= 1 << universe.index[label]
            except KeyError:
                raise UnknownNode(f"{label!r} is not in the universe") from None
        return cls(bits, universe)

    @classmethod
    def from_indices(cls, universe: Universe, indices: Iterable[int]) -> "NodeSet":
        bits = 0
        for i in indices:
            bits |= 1 << i
        return cls(bits, universe)

    @classmethod
    def empty(cls, universe: Universe) -> "NodeSet":
        return cls(0, universe)

    def indices(self) -> tuple[int, ...]:
        return tuple(iter_bits(self.bits))

    def labels(self) -> tuple[str, ...]:
        return tuple(self.universe.labels[i] for i in iter_bits(self.bits))

    def __iter__(self):
        return iter(self.labels())

    def __len__(self):
        return self.bits.bit_count()

    def __bool__(self):
        return self.bits != 0

    def __contains__(self, label):
        i = self.universe.index.get(label)
        return i is not None and bool(self.bits >> i & 1)

    def _check(self, other):
        if not isinstance(other, NodeSet):
            return NotImplemented
        if other.universe != self.universe:
            raise ValueError("node sets over different universes")
        return other

    def __or__(self, other):
        other = self._check(other)
        return NodeSet(self.bits | other.bits, self.universe)

    def __and__(self, other):
        other = self._check(other)
        return NodeSet(self.bits & other.bits, self.universe)

    def __sub__(self, other):
        other = self._check(other)
        return NodeSet(self.bits & ~other.bits, self.universe)

    def __invert__(self):
        return NodeSet(self.universe.full_mask & ~self.bits, self.universe)

    def __le__(self, other):
        other = self._check(other)
        return self.bits & ~other.bits == 0

    def __lt__(self, other):
        return self <= other and self.bits != other.bits

    def __ge__(self, other):
        return self._check(other) <= self

    def __gt__(self, other):
        return self._check(other) < self

    def __eq__(self, other):
        if not isinstance(other, NodeSet):
            return NotImplemented
        return self.bits == other.bits and self.universe == other.universe

    def __hash__(self):
        return hash((self.bits, self.universe))

    def sort_key(self):
        return (len(self), self.indices())

    def __repr__(self):
        return f"NodeSet({{{', '.join(repr(x) for x in self.labels())}}})"


# ---------------------------------------------------------------------------
# quorum sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuorumSet:
    """``threshold`` of the constituents (node members plus inner sets) must agree."""

    threshold: int
    node_members: tuple[str, ...] = ()
    inner_sets: tuple["QuorumSet", ...] = ()

    def __post_init__(self):
        # accept lists for convenience, store tuples
        object.__setattr__(self, "node_members", tuple(self.node_members))
        object.__setattr__(self, "inner_sets", tuple(self.inner_sets))

    @classmethod
    def trivial(cls) -> "QuorumSet":
        return cls(0)

    @property
    def constituents(self) -> int:
        return len(self.node_members) + len(self.inner_sets)

    def canonical(self) -> "QuorumSet":
        """Members sorted, inner sets canonicalised and sorted."""
        inner = sorted((q.canonical() for q in self.inner_sets), key=QuorumSet._key)
        return QuorumSet(self.threshold, tuple(sorted(self.node_members)), tuple(inner))

    def _key(self):
        return (self.threshold, self.node_members, tuple(q._key() for q in self.inner_sets))

    def depth(self) -> int:
        return 1 + max((q.depth() for q in self.inner_sets), default=0)

    def __str__(self):
        parts = list(self.node_members) + [f"({q})" for q in self.inner_sets]
        return f"{self.threshold}-of-{{{', '.join(parts)}}}"


def validate_quorum_set(qset: QuorumSet, universe=None, *, _path="", _depth=1) -> None:
    """Raise the first structural violation found in ``qset``.

    ``universe`` is any container of known node ids; pass ``None`` to skip
    the membership check (e.g. for a quorum set received from a stranger).
    """
    if _depth > MAX_QSET_DEPTH:
        raise DepthExceeded(f"nesting deeper than {MAX_QSET_DEPTH}", _path)
    if not 0 <= qset.threshold <= qset.constituents:
        raise ThresholdOutOfRange(
            f"threshold {qset.threshold} not in [0, {qset.constituents}]", _path or "threshold"
        )
    seen = set()
    for i, member in enumerate(qset.node_members):
        where = f"{_path}.node_members[{i}]" if _path else f"node_members[{i}]"
        if not isinstance(member, str) or not member:
            raise UnknownNode(f"invalid node id {member!r}", where)
        if member in seen:
            raise DuplicateMember(f"duplicate member {member!r}", where)
        seen.add(member)
        if universe is not None and member not in universe:
            raise UnknownNode(f"unknown node {member!r}", where)
    for i, inner in enumerate(qset.inner_sets):
        where = f"{_path}.inner_sets[{i}]" if _path else f"inner_sets[{i}]"
        validate_quorum_set(inner, universe, _path=where, _depth=_depth + 1)


def is_slice_satisfied(qset: QuorumSet, agreeing: NodeSet) -> bool:
    if qset.threshold <= 0:
        return True
    count = sum(1 for m in qset.node_members if m in agreeing)
    if count >= qset.threshold:
        return True
    for inner in qset.inner_sets:
        if is_slice_satisfied(inner, agreeing):
            count += 1
            if count >= qset.threshold:
                return True
    return False


def transitive_members(qset: QuorumSet) -> frozenset[str]:
    out = set(qset.node_members)
    for inner in qset.inner_sets:
        out |= transitive_members(inner)
    return frozenset(out)


def normalize_self_inclusion(owner: str, qset: QuorumSet) -> QuorumSet:
    """Add ``owner`` to the top level and raise the threshold by one.

    A quorum set that already mentions its owner anywhere is returned as is.
    """
    if owner in transitive_members(qset):
        return qset
    return QuorumSet(qset.threshold + 1, qset.node_members + (owner,), qset.inner_sets)


# ---------------------------------------------------------------------------
# FBAS
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Fbas:
    nodes: tuple[str, ...]
    quorum_sets: Mapping[str, QuorumSet]
    active: Mapping[str, bool] = field(default=None)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        universe = Universe(nodes)  # rejects duplicates
        qsets = dict(self.quorum_sets)
        missing = [n for n in nodes if n not in qsets]
        if missing:
            raise ValueError(f"nodes without quorum set: {missing}")
        extra = [n for n in qsets if n not in universe.index]
        if extra:
            raise UnknownNode(f"quorum sets for unknown nodes: {extra}")
        for n in nodes:
            validate_quorum_set(qsets[n], universe.index, _path=n)
        active = {n: True for n in nodes}
        if self.active is not None:
            for n, flag in self.active.items():
                if n not in universe.index:
                    raise UnknownNode(f"activity flag for unknown node {n!r}")
                active[n] = bool(flag)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "quorum_sets", MappingProxyType(qsets))
        object.__setattr__(self, "active", MappingProxyType(active))
        object.__setattr__(self, "_universe", universe)

    @property
    def universe(self) -> Universe:
        return self._universe

    def __len__(self):
        return len(self.nodes)

    def nodeset(self, labels: Iterable[str] = ()) -> NodeSet:
        return NodeSet.of(self._universe, labels)

    def active_set(self) -> NodeSet:
        return self.nodeset(n for n in self.nodes if self.active[n])

    def all_nodes(self) -> NodeSet:
        return NodeSet(self._universe.full_mask, self._universe)

    def structurally_equal(self, other: "Fbas") -> bool:
        return (
            self.nodes == other.nodes
            and all(self.quorum_sets[n].canonical() == other.quorum_sets[n].canonical()
                    for n in self.nodes)
            and dict(self.active) == dict(other.active)
        )

    def to_dict(self) -> dict:
        def q(qs):
            return {
                "threshold": qs.threshold,
                "node_members": list(qs.node_members),
                "inner_sets": [q(i) for i in qs.inner_sets],
            }

        return {
            "nodes": list(self.nodes),
            "quorum_sets": {n: q(self.quorum_sets[n].canonical()) for n in self.nodes},
            "active": {n: self.active[n] for n in self.nodes},
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def __repr__(self):
        n_active = sum(self.active.values())
        return f"<Fbas {len(self.nodes)} nodes, {n_active} active>"


def _map_qset(qset: QuorumSet, fn) -> QuorumSet:
    """Rebuild ``qset`` bottom-up; ``fn(threshold, members, inner)`` returns the new level."""
    inner = tuple(_map_qset(i, fn) for i in qset.inner_sets)
    return fn(qset.threshold, qset.node_members, inner)


def reduce_thresholds(fbas: Fbas, delta: int) -> Fbas:
    """Lower every threshold at every nesting level by ``delta`` (floor 0).

    Emits :class:`ThresholdClampWarning` when some threshold would go negative.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    clamped = False

    def level(t, members, inner):
        nonlocal clamped
        if t < delta:
            clamped = True
        return QuorumSet(max(0, t - delta), members, inner)

    qsets = {n: _map_qset(fbas.quorum_sets[n], level) for n in fbas.nodes}
    if clamped:
        warnings.warn(
            f"threshold reduction by {delta} clamped at 0", ThresholdClampWarning, stacklevel=2
        )
    return Fbas(fbas.nodes, qsets, fbas.active)


def restrict_to_active(fbas: Fbas) -> Fbas:
    """Drop inactive nodes (crash semantics).

    Inactive members disappear from member lists but thresholds stay, so a
    slice may become unsatisfiable; the result therefore skips the
    threshold-range check that crawled input has to pass.
    """
    keep = [n for n in fbas.nodes if fbas.active[n]]
    if not keep:
        raise NoActiveNodes("every node is inactive")
    alive = set(keep)

    def level(t, members, inner):
        return QuorumSet(t, tuple(m for m in members if m in alive), inner)

    qsets = {n: _map_qset(fbas.quorum_sets[n], level) for n in keep}
    return _unchecked_fbas(tuple(keep), qsets, {n: True for n in keep})


def _unchecked_fbas(nodes, qsets, active) -> Fbas:
    """Construct an Fbas whose thresholds may exceed their constituent counts."""
    obj = object.__new__(Fbas)
    universe = Universe(nodes)
    object.__setattr__(obj, "nodes", tuple(nodes))
    object.__setattr__(obj, "quorum_sets", MappingProxyType(dict(qsets)))
    object.__setattr__(obj, "active", MappingProxyType(dict(active)))
    object.__setattr__(obj, "_universe", universe)
    return obj


# ---------------------------------------------------------------------------
# groupings
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Grouping:
    kind: str
    assignment: Mapping[str, str]

    def __post_init__(self):
        if self.kind not in GROUPING_KINDS:
            raise ValueError(f"unknown grouping kind {self.kind!r}")
        for node, group in self.assignment.items():
            if not group:
                raise ValueError(f"empty group id for {node!r}")
        object.__setattr__(self, "assignment", MappingProxyType(dict(self.assignment)))

    @classmethod
    def none(cls, fbas: Fbas) -> "Grouping":
        return cls("none", {n: n for n in fbas.nodes})

    def check_total(self, fbas: Fbas) -> None:
        missing = [n for n in fbas.nodes if n not in self.assignment]
        if missing:
            raise ValueError(f"grouping {self.kind!r} does not cover {missing}")

    def groups(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.assignment.values())))

    def members(self, group: str) -> list[str]:
        return [n for n, g in self.assignment.items() if g == group]
