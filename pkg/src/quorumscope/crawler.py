"""Validator discovery by frontier expansion over quorum-set membership.

The crawler has no peer discovery to lean on: it asks each node for its
latest consensus message, reads the quorum set out of it and queues every
member it has not talked to yet.  It stops once a round of responses names
no new node.
"""

from __future__ import annotations

import itertools
import logging
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import Optional

from . import wire
from .errors import (
    AllBootstrapUnreachable,
    ConnectFailed,
    MalformedResponse,
    QueryError,
    QueryTimeout,
    QuorumScopeError,
)
from .model import Fbas, QuorumSet
from .wire import ConsensusMsgView, NodeAddress

log = logging.getLogger(__name__)

_request_ids = itertools.count(1)


def _utcnow():
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class NodeRecord:
    public_key: str
    address: Optional[NodeAddress]
    quorum_set: QuorumSet
    active: bool
    reason: Optional[str] = None
    block_index: Optional[int] = None
    metadata: Optional[object] = None  # enrichment.NodeMetadata


@dataclass(frozen=True)
class CrawlSnapshot:
    timestamp: datetime
    duration_ms: int
    records: tuple[NodeRecord, ...]
    bootstrap: tuple[NodeAddress, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "bootstrap", tuple(self.bootstrap))

    def record(self, key: str) -> NodeRecord:
        for r in self.records:
            if r.public_key == key:
                return r
        raise KeyError(key)

    @property
    def active_count(self) -> int:
        return sum(r.active for r in self.records)

    def to_fbas(self) -> Fbas:
        return Fbas(
            tuple(r.public_key for r in self.records),
            {r.public_key: r.quorum_set for r in self.records},
            {r.public_key: r.active for r in self.records},
        )

    def same_content(self, other: "CrawlSnapshot") -> bool:
        """Equal up to timestamp and duration."""
        return self.records == other.records and self.bootstrap == other.bootstrap

    def with_records(self, records) -> "CrawlSnapshot":
        return replace(self, records=tuple(records))


@dataclass(frozen=True)
class CrawlConfig:
    bootstrap: tuple[NodeAddress, ...]
    timeout_ms: int = 1000
    parallel: int = 8
    retries: int = 1

    def __post_init__(self):
        object.__setattr__(self, "bootstrap", tuple(self.bootstrap))
        if not self.bootstrap:
            raise ValueError("bootstrap list is empty")
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.parallel < 1:
            raise ValueError("parallel must be at least 1")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")


def query_node(address: NodeAddress, timeout_ms: int) -> ConsensusMsgView:
    """One get_latest_msg exchange; the timeout covers connect and reply."""
    rid = next(_request_ids)
    timeout = timeout_ms / 1000
    deadline = time.monotonic() + timeout
    try:
        sock = socket.create_connection((address.host, address.port), timeout=timeout)
    except socket.timeout:
        raise QueryTimeout(f"{address}: connect timed out") from None
    except OSError as exc:
        raise ConnectFailed(f"{address}: {exc.strerror or exc}") from None
    with sock:
        buf = b""
        try:
            sock.sendall(wire.request(rid))
            while b"\n" not in buf:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise QueryTimeout(f"{address}: no response within {timeout_ms} ms")
                sock.settimeout(remaining)
                chunk = sock.recv(65536)
                if not chunk:
                    raise MalformedResponse(f"{address}: connection closed before a full line")
                buf += chunk
                if len(buf) > wire.MAX_LINE:
                    raise MalformedResponse(f"{address}: response line too long")
        except socket.timeout:
            raise QueryTimeout(f"{address}: no response within {timeout_ms} ms") from None
        except OSError as exc:
            raise ConnectFailed(f"{address}: {exc.strerror or exc}") from None
    return wire.parse_response(buf.split(b"\n", 1)[0], rid)


def _attempt(query, address, config):
    err = None
    for _ in range(1 + config.retries):
        try:
            return query(address, config.timeout_ms)
        except QueryError as exc:
            err = exc
    return err


def crawl(config: CrawlConfig, query=query_node) -> CrawlSnapshot:
    """Crawl from the bootstrap addresses until no response names a new node."""
    started = _utcnow()
    t0 = time.monotonic()
    records: dict[str, NodeRecord] = {}
    failures: dict[str, str] = {}
    addresses: dict[str, NodeAddress] = {}
    contacted: set[NodeAddress] = set()
    any_response = False

    frontier = [(a, None) for a in dict.fromkeys(config.bootstrap)]
    with ThreadPoolExecutor(max_workers=config.parallel) as pool:
        while frontier:
            contacted.update(a for a, _ in frontier)
            outcomes = list(pool.map(lambda item: _attempt(query, item[0], config), frontier))

            # merge by public key so arrival order never matters
            answered = []
            for (addr, expected), outcome in zip(frontier, outcomes):
                if isinstance(outcome, ConsensusMsgView):
                    answered.append((outcome.sender_id, str(addr), addr, expected, outcome))
                elif expected is not None:
                    failures.setdefault(expected, f"{outcome.reason}: {outcome}")
                else:
                    log.warning("bootstrap %s unreachable: %s", addr, outcome)
            for key, _, addr, expected, view in sorted(answered, key=lambda t: t[:2]):
                any_response = True
                if expected is not None and expected != key:
                    failures.setdefault(expected, f"key_mismatch: {addr} answered as {key}")
                if key in records:
                    continue
                records[key] = NodeRecord(key, addr, view.quorum_set, True, None, view.block_index)
                addresses.setdefault(key, addr)
                for member in sorted(view.member_addresses):
                    addresses.setdefault(member, view.member_addresses[member])

            frontier = [
                (addresses[k], k)
                for k in sorted(addresses)
                if k not in records and k not in failures and addresses[k] not in contacted
            ]

    if not any_response:
        raise AllBootstrapUnreachable("no bootstrap node responded")

    for key, addr in addresses.items():
        if key not in records:
            reason = failures.get(key, "unreachable")
            records[key] = NodeRecord(key, addr, QuorumSet.trivial(), False, reason)

    duration = int(round((time.monotonic() - t0) * 1000))
    ordered = tuple(records[k] for k in sorted(records))
    return CrawlSnapshot(started, duration, ordered, config.bootstrap)


def crawl_loop(config: CrawlConfig, interval: float, sink, *, stop: threading.Event = None,
               max_ticks: int = None, crawl_fn=crawl, on_snapshot=None) -> list:
    """Crawl on every multiple of ``interval`` seconds and save into ``sink``.

    ``sink`` is a series directory.  A failed crawl is logged and skipped;
    an unusable store raises StoreUnavailable and ends the loop.  Returns the
    saved paths once ``stop`` is set or ``max_ticks`` crawls have run.
    """
    from .snapshots import ensure_store, save_snapshot

    if interval < 1:
        raise ValueError("interval must be at least 1 second")
    ensure_store(sink)
    stop = stop or threading.Event()
    saved = []
    ticks = 0
    while not stop.is_set() and (max_ticks is None or ticks < max_ticks):
        now = time.time()
        boundary = (int(now // interval) + 1) * interval
        if stop.wait(boundary - now):
            break
        ticks += 1
        try:
            snapshot = crawl_fn(config)
        except QuorumScopeError as exc:
            log.error("crawl %d failed: %s", ticks, exc)
            continue
        if on_snapshot is not None:
            snapshot = on_snapshot(snapshot)
        saved.append(save_snapshot(snapshot, sink))
    return saved
