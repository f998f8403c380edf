"""Per-snapshot analysis reports and their CSV / JSON renderings."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional

from .analysis import (
    CardinalityStats,
    analyze,
    cardinality_stats,
    lift_to_groups,
)
from .crawler import CrawlSnapshot
from .enrichment import grouping_from_snapshot
from .model import reduce_thresholds
from .wire import qset_to_json

REPORT_HEADER = (
    "timestamp", "node_count", "active_count", "top_tier_size",
    "mbs_min", "mbs_mean", "mbs_max", "mss_min", "mss_mean", "mss_max",
)

MERGE_KINDS = {"none": "none", "org": "organisation", "isp": "isp", "country": "country"}


def _mean(value) -> str:
    return f"{float(value):.1f}"


def short_timestamp(ts) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class ReportRow:
    timestamp: str
    node_count: Optional[int] = None
    active_count: Optional[int] = None
    top_tier_size: Optional[int] = None
    mbs: Optional[CardinalityStats] = None
    mss: Optional[CardinalityStats] = None

    def fields(self) -> list[str]:
        if self.mbs is None:
            return [self.timestamp] + [""] * (len(REPORT_HEADER) - 1)
        return [
            self.timestamp, str(self.node_count), str(self.active_count), str(self.top_tier_size),
            str(self.mbs.min), _mean(self.mbs.mean), str(self.mbs.max),
            str(self.mss.min), _mean(self.mss.mean), str(self.mss.max),
        ]


@dataclass(frozen=True)
class GroupedReportRow:
    grouping: str
    mbs_min: int
    mss_min: int


def report_row(snapshot: CrawlSnapshot, budget=None) -> ReportRow:
    report = analyze(snapshot.to_fbas(), budget)
    return ReportRow(
        short_timestamp(snapshot.timestamp), report.node_count, report.active_count,
        len(report.top_tier), report.blocking_stats, report.splitting_stats,
    )


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for row in rows:
        w.writerow(row.fields())
    return buf.getvalue()


def _stats_json(stats: CardinalityStats) -> dict:
    return {"min": stats.min, "mean": round(float(stats.mean), 1), "max": stats.max,
            "count": stats.count}


def _family_json(family) -> dict:
    return {
        "grouping": family.grouping,
        "vacuous": family.vacuous,
        "stats": _stats_json(cardinality_stats(family)),
        "sets": [list(s) for s in family.as_labels()],
    }


def analyze_snapshot(snapshot: CrawlSnapshot, merge="none", reduce_by=0, budget=None) -> dict:
    """Full report as a JSON-ready dict; families are lifted when ``merge`` is set."""
    fbas = snapshot.to_fbas()
    if reduce_by:
        fbas = reduce_thresholds(fbas, reduce_by)
    report = analyze(fbas, budget)
    blocking, splitting = report.blocking, report.splitting
    kind = MERGE_KINDS[merge]
    if kind != "none":
        grouping = grouping_from_snapshot(snapshot, kind)
        blocking = lift_to_groups(blocking, grouping, fbas, budget)
        splitting = lift_to_groups(splitting, grouping, fbas, budget)
    sym = report.symmetric_top_tier
    return {
        "timestamp": short_timestamp(snapshot.timestamp),
        "merge": merge,
        "reduce_thresholds": reduce_by,
        "node_count": report.node_count,
        "active_count": report.active_count,
        "quorum_intersection": report.quorum_intersection.holds,
        "quorum_intersection_vacuous": report.quorum_intersection.vacuous,
        "top_tier": list(report.top_tier.labels()),
        "top_tier_size": len(report.top_tier),
        "symmetric_top_tier": None if sym is None else {
            "members": list(sym.members.labels()),
            "common_quorum_set": qset_to_json(sym.common_qset),
            "summary": str(sym.common_qset),
        },
        "minimal_blocking_sets": _family_json(blocking),
        "minimal_splitting_sets": _family_json(splitting),
    }


def render_json(result: dict) -> str:
    return json.dumps(result, indent=2, sort_keys=True) + "\n"


def render_csv(result: dict) -> str:
    mbs = result["minimal_blocking_sets"]["stats"]
    mss = result["minimal_splitting_sets"]["stats"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("grouping",) + REPORT_HEADER)
    w.writerow([
        result["merge"], result["timestamp"], result["node_count"], result["active_count"],
        result["top_tier_size"],
        mbs["min"], f"{mbs['mean']:.1f}", mbs["max"],
        mss["min"], f"{mss['mean']:.1f}", mss["max"],
    ])
    return buf.getvalue()


def grouped_rows(snapshot: CrawlSnapshot, budget=None) -> list[GroupedReportRow]:
    """Smallest blocking / splitting set size under every grouping."""
    out = []
    for merge in MERGE_KINDS:
        res = analyze_snapshot(snapshot, merge, 0, budget)
        out.append(GroupedReportRow(
            MERGE_KINDS[merge],
            res["minimal_blocking_sets"]["stats"]["min"],
            res["minimal_splitting_sets"]["stats"]["min"],
        ))
    return out
