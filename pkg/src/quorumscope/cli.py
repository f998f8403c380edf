"""``quorumscope`` command line: crawl, analyze, batch, mocknet.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import threading
from pathlib import Path

from . import enrichment, reports, snapshots
from .crawler import CrawlConfig, crawl, crawl_loop
from .errors import (
    AllBootstrapUnreachable,
    AnalysisTimeout,
    BindFailed,
    ParseError,
    QuorumScopeError,
    StoreUnavailable,
    ValidationError,
)
from .wire import NodeAddress

log = logging.getLogger("quorumscope")

BUDGET_ENV = "QS_ANALYSIS_BUDGET"


class UsageError(Exception):
    pass


def _budget():
    raw = os.environ.get(BUDGET_ENV)
    if raw is None:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{BUDGET_ENV} must be an integer") from None
    if value <= 0:
        raise UsageError(f"{BUDGET_ENV} must be positive")
    return value


def _read_bootstrap(path):
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read bootstrap file: {exc}") from None
    out = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(NodeAddress.parse(line))
        except ValueError as exc:
            raise UsageError(f"bad bootstrap address: {exc}") from None
    if not out:
        raise UsageError("bootstrap file lists no addresses")
    return out


def _enricher(args):
    if not (args.org_table or args.ip_table):
        return None
    try:
        org = enrichment.load_org_table(args.org_table) if args.org_table else enrichment.OrgRuleTable()
        ip = enrichment.load_ip_table(args.ip_table) if args.ip_table else enrichment.IpMetaTable()
        hosts = enrichment.load_hosts_table(args.hosts_table) if args.hosts_table else {}
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load enrichment tables: {exc}") from None
    return lambda snap: enrichment.enrich_snapshot(snap, org, ip, hosts=hosts)


def _summary(snapshot):
    return f"{len(snapshot.records)} nodes ({snapshot.active_count} active) in {snapshot.duration_ms} ms"


def cmd_crawl(args):
    config = CrawlConfig(
        tuple(_read_bootstrap(args.bootstrap)),
        timeout_ms=args.timeout_ms, parallel=args.parallel, retries=args.retries,
    )
    enrich = _enricher(args)

    def finish(snap):
        snap = enrich(snap) if enrich else snap
        print(_summary(snap), flush=True)
        return snap

    if args.loop_interval_s is not None:
        try:
            crawl_loop(config, args.loop_interval_s, args.out, on_snapshot=finish,
                       max_ticks=args.max_ticks, stop=threading.Event())
        except KeyboardInterrupt:
            pass
        return 0
    try:
        snap = finish(crawl(config))
    except AllBootstrapUnreachable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    path = snapshots.save_snapshot(snap, args.out)
    print(path)
    return 0


def _load_for_cli(path):
    try:
        return snapshots.load_snapshot(path)
    except (OSError, ParseError, ValidationError, QuorumScopeError) as exc:
        raise UsageError(f"cannot read snapshot {path}: {exc}") from None


def cmd_analyze(args):
    snap = _load_for_cli(args.snapshot)
    if args.org_table or args.ip_table:
        snap = _enricher(args)(snap)
    result = reports.analyze_snapshot(snap, args.merge, args.reduce_thresholds, _budget())
    out = reports.render_json(result) if args.format == "json" else reports.render_csv(result)
    sys.stdout.write(out)
    return 0


def cmd_batch(args):
    paths = snapshots.list_series(args.dir)
    budget = _budget()
    rows = []
    parsed = 0
    for path in paths:
        try:
            snap = snapshots.load_snapshot(path)
            rows.append(reports.report_row(snap, budget))
            parsed += 1
        except QuorumScopeError as exc:
            log.error("skipping %s: %s", path.name, exc)
            stamp = path.stem
            ts = f"{stamp[0:4]}-{stamp[4:6]}-{stamp[6:8]}T{stamp[9:11]}:{stamp[11:13]}:{stamp[13:15]}Z"
            rows.append(reports.ReportRow(ts))
    if not parsed:
        print(f"error: no snapshots parsed in {args.dir}", file=sys.stderr)
        return 1
    Path(args.out).write_text(reports.rows_to_csv(rows), encoding="utf-8", newline="\n")
    print(f"{len(rows)} rows -> {args.out}")
    return 0


def cmd_mocknet(args):
    from . import mocknet

    try:
        if args.topology == "mobilecoin-2021":
            topo = mocknet.load_bundled_topology()
        else:
            topo = mocknet.load_topology(args.topology)
        if args.down:
            down = {k.strip() for k in args.down.split(",") if k.strip()}
            topo = mocknet.Topology(topo.name, topo.nodes, topo.faults | down)
        control_addr = None
        if args.control:
            host, sep, port = args.control.rpartition(":")
            if not sep or not port.isdigit() or not host:
                raise ValueError(f"--control expects host:port, got {args.control!r}")
            control_addr = (host.strip("[]"), int(port))
    except (ParseError, ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        net = mocknet.serve(topo, ephemeral=args.ephemeral)
    except BindFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    control = None
    try:
        if control_addr is not None:
            control = mocknet.ControlServer(net, *control_addr)
            print(f"control {control.address}", flush=True)
        for key, addr in net.addresses.items():
            state = "up" if net.is_up(key) else "down"
            print(f"{key} {addr} {state}", flush=True)
        print("ready", flush=True)
        threading.Event().wait()
    except BindFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        pass
    finally:
        if control:
            control.close()
        net.close()
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="quorumscope", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def tables(sp):
        sp.add_argument("--org-table", help="CSV hostname_suffix,organisation")
        sp.add_argument("--ip-table", help="CSV cidr,country,isp")
        sp.add_argument("--hosts-table", help="CSV hostname,ip")

    c = sub.add_parser("crawl", help="crawl a validator network into a snapshot")
    c.add_argument("--bootstrap", required=True, help="file with one host:port per line")
    c.add_argument("--timeout-ms", type=int, default=1000)
    c.add_argument("--parallel", type=int, default=8)
    c.add_argument("--retries", type=int, default=1)
    c.add_argument("--out", default="snapshots", help="series directory")
    c.add_argument("--loop-interval-s", type=int, default=None)
    c.add_argument("--max-ticks", type=int, default=None, help=argparse.SUPPRESS)
    tables(c)
    c.set_defaults(func=cmd_crawl)

    a = sub.add_parser("analyze", help="analyse one snapshot")
    a.add_argument("--snapshot", required=True)
    a.add_argument("--merge", choices=list(reports.MERGE_KINDS), default="none")
    a.add_argument("--format", choices=("json", "csv"), default="json")
    a.add_argument("--reduce-thresholds", type=int, default=0, metavar="K")
    tables(a)
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("batch", help="one CSV row per snapshot in a series directory")
    b.add_argument("--dir", required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_batch)

    m = sub.add_parser("mocknet", help="serve a mock validator topology on loopback")
    m.add_argument("--topology", required=True, help="topology file, or 'mobilecoin-2021'")
    m.add_argument("--down", help="comma-separated keys to start down")
    m.add_argument("--control", help="host:port for fault-injection commands")
    m.add_argument("--ephemeral", action="store_true", help="bind OS-chosen ports")
    m.set_defaults(func=cmd_mocknet)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    for flag in ("timeout_ms", "parallel"):
        if getattr(args, flag, 1) is not None and getattr(args, flag, 1) <= 0:
            parser.error(f"--{flag.replace('_', '-')} must be positive")
    if getattr(args, "loop_interval_s", None) is not None and args.loop_interval_s < 1:
        parser.error("--loop-interval-s must be at least 1")
    if getattr(args, "reduce_thresholds", 0) < 0 or getattr(args, "retries", 0) < 0:
        parser.error("counts must be non-negative")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AnalysisTimeout as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StoreUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
