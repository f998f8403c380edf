"""
Crawling a loopback network
===========================

Start the bundled topology on OS-chosen ports, crawl it from one bootstrap
address, then take a validator down and crawl again.
"""

from quorumscope import CrawlConfig, analyze, crawl
from quorumscope.mocknet import load_bundled_topology, serve

with serve(load_bundled_topology(), ephemeral=True) as net:
    config = CrawlConfig((net.address("MC1"),), timeout_ms=1000, retries=0)

    first = crawl(config)
    print(f"{len(first.records)} nodes ({first.active_count} active) in {first.duration_ms} ms")

    net.inject_fault("Dre", "down")
    faulted = crawl(config)
    dre = faulted.record("Dre")
    print(f"Dre down: active={dre.active} reason={dre.reason!r}")

    net.inject_fault("Dre", "up")
    again = crawl(config)
    print("same content as the first crawl:", again.same_content(first))

    for label, snap in (("clean", first), ("faulted", faulted)):
        r = analyze(snap.to_fbas())
        print(f"{label:8s} smallest blocking {r.blocking_stats.min}, "
              f"smallest splitting {r.splitting_stats.min}")
