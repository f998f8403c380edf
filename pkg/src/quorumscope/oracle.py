"""Exhaustive reference enumeration of the minimal-set families.

Deliberately naive: every subset of the active nodes is tried with
:func:`is_quorum` and :func:`delete_byzantine` only, so it shares no search
logic with :mod:`quorumscope.analysis`.  Use it to cross-check results on
small systems.
"""

from __future__ import annotations

from .analysis import FAMILY_KINDS, MinimalSetFamily, delete_byzantine, is_quorum
from .errors import UniverseTooLarge
from .model import Fbas, NodeSet

MAX_ORACLE_NODES = 20


def _subsets(mask):
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def _minimal(masks):
    kept = []
    for m in sorted(set(masks), key=lambda x: (bin(x).count("1"), x)):
        if not any(k & ~m == 0 for k in kept):
            kept.append(m)
    return kept


def _active_mask(fbas):
    mask = 0
    for i, v in enumerate(fbas.nodes):
        if fbas.active[v]:
            mask |= 1 << i
    return mask


def _all_quorums(fbas):
    universe = fbas.universe
    return [m for m in _subsets(_active_mask(fbas)) if m and is_quorum(fbas, NodeSet(m, universe))]


def _splits(fbas, s_mask):
    """True iff deleting ``s_mask`` leaves two disjoint quorums."""
    universe = fbas.universe
    deleted = delete_byzantine(fbas, NodeSet(s_mask, universe))
    minimal = _minimal(_all_quorums(deleted))
    return any(not a & b for i, a in enumerate(minimal) for b in minimal[i + 1:])


def oracle_enumerate(fbas: Fbas, kind: str) -> MinimalSetFamily:
    if kind not in FAMILY_KINDS:
        raise ValueError(f"unknown family kind {kind!r}")
    if len(fbas.nodes) > MAX_ORACLE_NODES:
        raise UniverseTooLarge(f"{len(fbas.nodes)} nodes; oracle limit is {MAX_ORACLE_NODES}")
    active = _active_mask(fbas)
    vacuous = False
    if kind == "quorums":
        masks = _minimal(_all_quorums(fbas))
    elif kind == "blocking":
        quorums = _all_quorums(fbas)
        if not quorums:
            masks, vacuous = [], True
        else:
            masks = _minimal(s for s in _subsets(active) if all(q & s for q in quorums))
    else:
        masks = _minimal(s for s in _subsets(active) if _splits(fbas, s))
    sets = sorted((NodeSet(m, fbas.universe) for m in masks), key=NodeSet.sort_key)
    return MinimalSetFamily(kind, tuple(sets), fbas.fingerprint(), vacuous=vacuous)
