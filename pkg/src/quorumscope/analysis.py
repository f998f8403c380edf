"""Quorums, blocking sets, splitting sets and the top tier of an FBAS.

All searches run on the active nodes only (crash semantics: an inactive
node never helps satisfy a slice) but report node sets in the index space
of the Fbas that was passed in, so results line up with snapshot records.

Node sets are handled as int bitmasks internally.  Quorum sets are
compiled once per call into ``(threshold, member_mask, inner)`` tuples.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .errors import AnalysisTimeout, NoActiveNodes
from .model import (
    Fbas,
    Grouping,
    NodeSet,
    QuorumSet,
    Universe,
    _unchecked_fbas,
    is_slice_satisfied,
    iter_bits,
    normalize_self_inclusion,
    restrict_to_active,
)

DEFAULT_BUDGET = 10**7

FAMILY_KINDS = ("quorums", "blocking", "splitting")


# ---------------------------------------------------------------------------
# result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimalSetFamily:
    """An antichain of node (or group) sets in canonical order.

    ``vacuous`` is only ever set on a blocking family of an FBAS without any
    quorum: the empty set is then blocking, and the family is left empty
    rather than holding ``{}``.
    """

    kind: str
    sets: tuple[NodeSet, ...]
    fbas_fingerprint: str
    grouping: str = "none"
    vacuous: bool = False

    def __len__(self):
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    def __contains__(self, item):
        if not isinstance(item, NodeSet):
            if not self.sets:
                return False
            item = NodeSet.of(self.sets[0].universe, item)
        return item in set(self.sets)

    def as_labels(self) -> list[tuple[str, ...]]:
        return [s.labels() for s in self.sets]

    def is_antichain(self) -> bool:
        return not any(a < b for a in self.sets for b in self.sets)


@dataclass(frozen=True)
class CardinalityStats:
    min: int
    mean: Fraction
    max: int
    count: int


@dataclass(frozen=True)
class SymmetricTopTierDescriptor:
    members: NodeSet
    common_qset: QuorumSet


@dataclass(frozen=True)
class QuorumIntersectionCheck:
    holds: bool
    vacuous: bool = False
    # two disjoint minimal quorums when ``holds`` is false
    witness: Optional[tuple[NodeSet, NodeSet]] = None

    def __bool__(self):
        return self.holds


@dataclass(frozen=True)
class AnalysisReport:
    fbas_fingerprint: str
    node_count: int
    active_count: int
    quorum_intersection: QuorumIntersectionCheck
    top_tier: NodeSet
    symmetric_top_tier: Optional[SymmetricTopTierDescriptor]
    minimal_quorums: MinimalSetFamily
    blocking: MinimalSetFamily
    splitting: MinimalSetFamily
    blocking_stats: CardinalityStats
    splitting_stats: CardinalityStats


# ---------------------------------------------------------------------------
# compiled evaluation
# ---------------------------------------------------------------------------

class _Budget:
    __slots__ = ("limit", "used")

    def __init__(self, limit):
        self.limit = DEFAULT_BUDGET if limit is None else int(limit)
        self.used = 0

    def tick(self):
        self.used += 1
        if self.used > self.limit:
            raise AnalysisTimeout(f"search budget of {self.limit} branches exceeded")


def _as_budget(budget):
    return budget if isinstance(budget, _Budget) else _Budget(budget)


def _sat(cq, mask):
    threshold, members, inner = cq
    if threshold <= 0:
        return True
    count = (members & mask).bit_count()
    if count >= threshold:
        return True
    for sub in inner:
        if _sat(sub, mask):
            count += 1
            if count >= threshold:
                return True
    return False


def _compile_qset(qset, index):
    members = 0
    for m in qset.node_members:
        members |= 1 << index[m]
    inner = tuple(_compile_qset(q, index) for q in qset.inner_sets)
    return (qset.threshold, members, inner)


def _reach(cq):
    _, members, inner = cq
    for sub in inner:
        members |= _reach(sub)
    return members


class _Compiled:
    def __init__(self, fbas: Fbas):
        index = fbas.universe.index
        self.fbas = fbas
        self.universe = fbas.universe
        self.qsets = [_compile_qset(fbas.quorum_sets[v], index) for v in fbas.nodes]
        self.reach = [_reach(cq) for cq in self.qsets]
        self.active = 0
        for i, v in enumerate(fbas.nodes):
            if fbas.active[v]:
                self.active |= 1 << i

    def nodeset(self, mask) -> NodeSet:
        return NodeSet(mask, self.universe)

    def unsatisfied(self, selected, helpers=0):
        """Lowest node of ``selected`` whose slice fails against ``selected | helpers``."""
        ctx = selected | helpers
        for v in iter_bits(selected):
            if not _sat(self.qsets[v], ctx):
                return v
        return None

    def greatest(self, within, helpers=0):
        """Largest U within ``within`` whose members are satisfied by ``U | helpers``.

        With ``helpers == 0`` this is the union of all quorums inside ``within``.
        """
        qsets = self.qsets
        while True:
            ctx = within | helpers
            keep = within
            for v in iter_bits(within):
                if not _sat(qsets[v], ctx):
                    keep &= ~(1 << v)
            if keep == within:
                return within
            within = keep

    def shrink(self, quorum, helpers=0):
        """Reduce a quorum to a minimal one contained in it."""
        changed = True
        while changed:
            changed = False
            for v in iter_bits(quorum):
                smaller = self.greatest(quorum & ~(1 << v), helpers)
                if smaller:
                    quorum = smaller
                    changed = True
                    break
        return quorum

    def minimal_quorums(self, pool, budget, helpers=0):
        """All minimal U within ``pool`` with every member satisfied by ``U | helpers``.

        Branch and bound: nodes are either taken into the selection or
        dropped from the pool; the pool is kept at its greatest fixpoint so
        a selection that cannot be completed is abandoned immediately.
        """
        found = set()

        def step(selected, avail):
            budget.tick()
            avail = self.greatest(avail, helpers)
            if selected & ~avail:
                return
            if selected:
                w = self.unsatisfied(selected, helpers)
                if w is None:
                    found.add(self.shrink(selected, helpers))
                    return
                cand = self.reach[w] & avail & ~selected
            else:
                cand = avail
            if not cand:
                return
            bit = cand & -cand
            step(selected | bit, avail)
            step(selected, avail & ~bit)

        step(0, pool)
        return _minimal_masks(found)

    def deletion_splits(self, s, budget):
        """Does deleting exactly ``s`` leave two disjoint quorums?"""
        pool = self.active & ~s
        for q1 in self.minimal_quorums(pool, budget, helpers=s):
            budget.tick()
            if self.greatest(pool & ~q1, s):
                return True
        return False


def _minimal_masks(masks: Iterable[int]) -> list[int]:
    kept = []
    for m in sorted(set(masks), key=lambda x: (x.bit_count(), x)):
        if not any(k & ~m == 0 for k in kept):
            kept.append(m)
    return kept


def _family(kind, masks, universe, fingerprint, grouping="none", vacuous=False):
    sets = sorted((NodeSet(m, universe) for m in masks), key=NodeSet.sort_key)
    return MinimalSetFamily(kind, tuple(sets), fingerprint, grouping, vacuous)


def _compiled(fbas):
    return fbas if isinstance(fbas, _Compiled) else _Compiled(fbas)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def is_quorum(fbas: Fbas, candidate: NodeSet) -> bool:
    """Non-empty, all members active, every member's slice satisfied by the set."""
    if not candidate:
        return False
    for v in candidate:
        if not fbas.active[v]:
            return False
        if not is_slice_satisfied(fbas.quorum_sets[v], candidate):
            return False
    return True


def find_minimal_quorums(fbas: Fbas, budget=None) -> MinimalSetFamily:
    c = _Compiled(fbas)
    if not c.active:
        raise NoActiveNodes("no active node to form a quorum")
    masks = c.minimal_quorums(c.active, _as_budget(budget))
    return _family("quorums", masks, c.universe, fbas.fingerprint())


def check_quorum_intersection(fbas: Fbas, budget=None) -> QuorumIntersectionCheck:
    c = _Compiled(fbas)
    quorums = c.minimal_quorums(c.active, _as_budget(budget))
    if not quorums:
        return QuorumIntersectionCheck(True, vacuous=True)
    for a, b in itertools.combinations(quorums, 2):
        if not a & b:
            return QuorumIntersectionCheck(False, witness=(c.nodeset(a), c.nodeset(b)))
    return QuorumIntersectionCheck(True)


def has_quorum_intersection(fbas: Fbas, budget=None) -> bool:
    return check_quorum_intersection(fbas, budget).holds


def _minimal_transversals(edges, budget):
    """Berge's incremental construction of the minimal hitting sets."""
    trans = [0]
    for edge in sorted(edges, key=lambda e: (e.bit_count(), e)):
        grown = set()
        for t in trans:
            budget.tick()
            if t & edge:
                grown.add(t)
            else:
                for v in iter_bits(edge):
                    grown.add(t | (1 << v))
        trans = _minimal_masks(grown)
    return trans


def find_minimal_blocking_sets(fbas: Fbas, budget=None) -> MinimalSetFamily:
    c = _Compiled(fbas)
    budget = _as_budget(budget)
    quorums = c.minimal_quorums(c.active, budget)
    if not quorums:
        return _family("blocking", [], c.universe, fbas.fingerprint(), vacuous=True)
    return _family("blocking", _minimal_transversals(quorums, budget), c.universe,
                   fbas.fingerprint())


def _splitting_masks(c: _Compiled, budget, allowed=None, first=False) -> list[int]:
    """Minimal S such that deleting S (Byzantine) leaves two disjoint quorums.

    Deleting S with threshold reduction is the same as letting S count as
    agreeing with everyone, so S splits iff there are disjoint non-empty
    Q1, Q2 outside S with every member of Qi satisfied by ``Qi | S``.
    We label nodes as Q1 / S / neither; Q2 is recovered as a greatest
    fixpoint over the unlabelled rest, so it never needs its own branch.

    Only nodes in ``allowed`` may be labelled S; with ``first`` the search
    stops at the first hit.
    """
    A = c.active
    allowed = A if allowed is None else allowed & A
    found = []

    class _Done(Exception):
        pass

    def covered(s):
        for f in found:
            if f & ~s == 0:
                return True
        return False

    def step(q1, s, avail):
        budget.tick()
        if covered(s):
            return
        loose = s | (avail & allowed)
        # Q2 has to fit somewhere outside q1 even if all of avail ends up in S
        if not c.greatest(A & ~q1 & ~s, loose):
            return
        if q1:
            if q1 & ~c.greatest(q1 | avail, loose):
                return
            w = c.unsatisfied(q1, s)
            if w is None:
                if c.greatest(A & ~q1 & ~s, s):
                    found.append(s)
                    if first:
                        raise _Done
                    return
                if not avail & allowed:
                    return
                bit = avail & allowed & -(avail & allowed)
                step(q1, s | bit, avail & ~bit)
                step(q1, s, avail & ~bit)
                return
            cand = c.reach[w] & avail
        else:
            cand = avail
        if not cand:
            return
        bit = cand & -cand
        rest = avail & ~bit
        step(q1 | bit, s, rest)
        if bit & allowed:
            step(q1, s | bit, rest)
        step(q1, s, rest)

    try:
        step(0, 0, A)
    except _Done:
        pass
    return _minimal_masks(found)


def find_minimal_splitting_sets(fbas: Fbas, budget=None) -> MinimalSetFamily:
    c = _Compiled(fbas)
    masks = _splitting_masks(c, _as_budget(budget))
    return _family("splitting", masks, c.universe, fbas.fingerprint())


def is_blocking_set(fbas: Fbas, s: NodeSet) -> bool:
    c = _Compiled(fbas)
    return not c.greatest(c.active & ~s.bits)


def is_splitting_set(fbas: Fbas, s: NodeSet, budget=None) -> bool:
    """True if deleting some subset of ``s`` leaves two disjoint quorums.

    Deleting exactly ``s`` is not enough as a test: once too few nodes are
    left no two disjoint quorums fit, yet a node set holding a splitting
    set can still split.  The minimal sets are the same under both views.
    """
    c = _Compiled(fbas)
    s = s.bits & c.active
    budget = _as_budget(budget)
    return c.deletion_splits(s, budget) or bool(_splitting_masks(c, budget, s, first=True))


def deletion_splits(fbas: Fbas, s: NodeSet, budget=None) -> bool:
    """Does deleting exactly ``s`` leave two disjoint non-empty quorums?"""
    c = _Compiled(fbas)
    return c.deletion_splits(s.bits & c.active, _as_budget(budget))


def is_splitting_literal(fbas: Fbas, s: NodeSet, budget=None) -> bool:
    """Diagnostic: does ``s`` contain the intersection of two distinct quorums?

    Every quorum contains a minimal one, so it is enough to look at pairs
    of distinct minimal quorums, plus the case where ``s`` holds a minimal
    quorum M that some other quorum strictly contains.
    """
    c = _Compiled(fbas)
    quorums = c.minimal_quorums(c.active, _as_budget(budget))
    bits = s.bits
    for a, b in itertools.combinations(quorums, 2):
        if (a & b) & ~bits == 0:
            return True
    largest = c.greatest(c.active)
    return any(m & ~bits == 0 and largest != m for m in quorums)


def delete_byzantine(fbas: Fbas, s: NodeSet) -> Fbas:
    """Remove ``s``; every deleted member lowers its level's threshold by one (floor 0)."""
    gone = set(s.labels())

    def strip(qset):
        inner = tuple(strip(i) for i in qset.inner_sets)
        hit = sum(1 for m in qset.node_members if m in gone)
        members = tuple(m for m in qset.node_members if m not in gone)
        return QuorumSet(max(0, qset.threshold - hit), members, inner)

    keep = [v for v in fbas.nodes if v not in gone]
    return _unchecked_fbas(
        keep, {v: strip(fbas.quorum_sets[v]) for v in keep}, {v: fbas.active[v] for v in keep}
    )


def top_tier(fbas: Fbas, budget=None) -> NodeSet:
    c = _Compiled(fbas)
    union = 0
    for q in c.minimal_quorums(c.active, _as_budget(budget)):
        union |= q
    return c.nodeset(union)


def detect_symmetric_top_tier(fbas: Fbas, budget=None) -> Optional[SymmetricTopTierDescriptor]:
    """Descriptor if every top-tier node has the same self-included quorum set.

    Quorum sets are compared on the active-restricted FBAS, i.e. with
    inactive members dropped.
    """
    tier = top_tier(fbas, budget)
    if not tier:
        return None
    effective = restrict_to_active(fbas)
    normalized = {
        normalize_self_inclusion(v, effective.quorum_sets[v]).canonical() for v in tier
    }
    if len(normalized) != 1:
        return None
    return SymmetricTopTierDescriptor(tier, normalized.pop())


def cardinality_stats(family: MinimalSetFamily) -> CardinalityStats:
    sizes = [len(s) for s in family.sets]
    if not sizes:
        return CardinalityStats(0, Fraction(0), 0, 0)
    return CardinalityStats(min(sizes), Fraction(sum(sizes), len(sizes)), max(sizes), len(sizes))


def lift_to_groups(family: MinimalSetFamily, grouping: Grouping, fbas: Fbas,
                   budget=None) -> MinimalSetFamily:
    """Minimal sets of groups whose node union has the family's property.

    The property is evaluated on the node-level FBAS for every candidate
    group set, smallest first; supersets of an accepted set are skipped.
    """
    if family.kind not in FAMILY_KINDS:
        raise ValueError(f"unknown family kind {family.kind!r}")
    grouping.check_total(fbas)
    c = _Compiled(fbas)
    budget = _as_budget(budget)
    groups = sorted({grouping.assignment[v] for v in fbas.nodes})
    index = c.universe.index
    group_masks = []
    for g in groups:
        m = 0
        for v in fbas.nodes:
            if grouping.assignment[v] == g:
                m |= 1 << index[v]
        group_masks.append(m)
    universe = Universe(groups)
    A = c.active

    if family.kind == "quorums":
        def holds(nodes):
            return bool(c.greatest(nodes & A))
    elif family.kind == "blocking":
        if not c.greatest(A):
            return _family("blocking", [], universe, family.fbas_fingerprint,
                           grouping.kind, vacuous=True)

        def holds(nodes):
            return not c.greatest(A & ~nodes)
    else:
        def holds(nodes):
            nodes &= A
            return c.deletion_splits(nodes, budget) or bool(
                _splitting_masks(c, budget, nodes, first=True))

    found = []
    start = 0 if family.kind == "splitting" else 1
    for k in range(start, len(groups) + 1):
        for combo in itertools.combinations(range(len(groups)), k):
            gmask = 0
            for i in combo:
                gmask |= 1 << i
            if any(f & ~gmask == 0 for f in found):
                continue
            budget.tick()
            nodes = 0
            for i in combo:
                nodes |= group_masks[i]
            if holds(nodes):
                found.append(gmask)
    return _family(family.kind, found, universe, family.fbas_fingerprint, grouping.kind)


def analyze(fbas: Fbas, budget=None) -> AnalysisReport:
    """Node-level report: intersection, top tier, families and their statistics."""
    budget = _as_budget(budget)
    c = _Compiled(fbas)
    fp = fbas.fingerprint()
    quorums = c.minimal_quorums(c.active, budget)
    if quorums:
        blocking = _family("blocking", _minimal_transversals(quorums, budget), c.universe, fp)
        disjoint = next(((a, b) for a, b in itertools.combinations(quorums, 2) if not a & b), None)
        if disjoint:
            qi = QuorumIntersectionCheck(False, witness=tuple(map(c.nodeset, disjoint)))
        else:
            qi = QuorumIntersectionCheck(True)
    else:
        blocking = _family("blocking", [], c.universe, fp, vacuous=True)
        qi = QuorumIntersectionCheck(True, vacuous=True)
    splitting = _family("splitting", _splitting_masks(c, budget), c.universe, fp)
    union = 0
    for q in quorums:
        union |= q
    return AnalysisReport(
        fbas_fingerprint=fp,
        node_count=len(fbas.nodes),
        active_count=c.active.bit_count(),
        quorum_intersection=qi,
        top_tier=c.nodeset(union),
        symmetric_top_tier=detect_symmetric_top_tier(fbas, budget) if union else None,
        minimal_quorums=_family("quorums", quorums, c.universe, fp),
        blocking=blocking,
        splitting=splitting,
        blocking_stats=cardinality_stats(blocking),
        splitting_stats=cardinality_stats(splitting),
    )
