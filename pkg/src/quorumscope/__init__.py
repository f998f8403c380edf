"""Crawl federated Byzantine agreement validator networks and analyse their quorum structure."""

from .analysis import (
    AnalysisReport,
    CardinalityStats,
    MinimalSetFamily,
    SymmetricTopTierDescriptor,
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
    top_tier,
)
from .crawler import CrawlConfig, CrawlSnapshot, NodeRecord, crawl, crawl_loop, query_node
from .model import (
    Fbas,
    Grouping,
    NodeSet,
    QuorumSet,
    is_slice_satisfied,
    normalize_self_inclusion,
    reduce_thresholds,
    restrict_to_active,
    transitive_members,
    validate_quorum_set,
)
from .oracle import oracle_enumerate
from .wire import NodeAddress

__version__ = "0.1.0"
