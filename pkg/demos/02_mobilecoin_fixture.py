"""
The 2021 MobileCoin validator set
=================================

Ten validators, each requiring 7 of the other 9.  We analyse the bundled
snapshot at node level, grouped by organisation, ISP and country, with one
node missing, and with every threshold lowered by one.
"""

import warnings

from quorumscope import Fbas, analyze, reduce_thresholds
from quorumscope.enrichment import bundled_hosts, bundled_ip_table, bundled_org_table, enrich_snapshot
from quorumscope.reports import analyze_snapshot
from quorumscope.snapshots import load_bundled_snapshot

snapshot = enrich_snapshot(load_bundled_snapshot(), bundled_org_table(), bundled_ip_table(),
                           hosts=bundled_hosts())
fbas = snapshot.to_fbas()

report = analyze(fbas)
print("quorum intersection:", report.quorum_intersection.holds)
print("top tier:", len(report.top_tier), "nodes")
print("common quorum set:", report.symmetric_top_tier.common_qset)


def line(label, stats):
    return f"{label} min {stats.min} mean {float(stats.mean):.1f} max {stats.max} ({stats.count} sets)"


print(line("blocking ", report.blocking_stats))
print(line("splitting", report.splitting_stats))

# Grouping: a set of organisations (ISPs, countries) counts when the union
# of their nodes has the property.
print()
for merge in ("org", "isp", "country"):
    res = analyze_snapshot(snapshot, merge)
    for key in ("minimal_blocking_sets", "minimal_splitting_sets"):
        fam = res[key]
        smallest = [s for s in fam["sets"] if len(s) == fam["stats"]["min"]]
        print(f"{merge:8s} {key[8:]:15s} smallest {fam['stats']['min']}: {smallest[:3]}")

# One validator unreachable: blocking gets easier, splitting harder.
print()
dropped = analyze(Fbas(fbas.nodes, fbas.quorum_sets, {"Dre": False}))
print("Dre inactive:", line("blocking", dropped.blocking_stats))
print("Dre inactive:", line("splitting", dropped.splitting_stats))

# Lowering every threshold by one trades safety for liveness.
with warnings.catch_warnings():
    warnings.simplefilter("error")
    lowered = analyze(reduce_thresholds(fbas, 1))
print("thresholds - 1:", line("blocking", lowered.blocking_stats))
print("thresholds - 1:", line("splitting", lowered.splitting_stats))
by_org = analyze_snapshot(snapshot, "org", reduce_by=1)
print("thresholds - 1, two organisations suffice:",
      [s for s in by_org["minimal_splitting_sets"]["sets"] if len(s) == 2][:3])
