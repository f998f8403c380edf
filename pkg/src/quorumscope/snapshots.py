"""Snapshot files and time-series directories.

A snapshot is stored as UTF-8 JSON with sorted keys, two-space indent and
a trailing LF, so saving a loaded snapshot reproduces the file byte for
byte.  Series directories hold one file per crawl named after the crawl's
start time, ``YYYYMMDDTHHMMSSZ.json``.
"""

from __future__ import annotations

import json
import logging
import os
import re
import tempfile
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from .crawler import CrawlSnapshot, NodeRecord
from .enrichment import NodeMetadata
from .errors import (
    DuplicateTimestamp,
    ParseError,
    QuorumSetError,
    SchemaVersionUnsupported,
    StoreUnavailable,
    ValidationError,
)
from .model import validate_quorum_set
from .wire import NodeAddress, qset_from_json, qset_to_json

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_TS_FORMAT = "%Y-%m-%dT%H:%M:%S.%fZ"
_NAME_FORMAT = "%Y%m%dT%H%M%SZ"
_NAME_RE = re.compile(r"^\d{8}T\d{6}Z\.json$")


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime(_TS_FORMAT)


def parse_timestamp(text: str) -> datetime:
    for fmt in (_TS_FORMAT, "%Y-%m-%dT%H:%M:%SZ"):
        try:
            return datetime.strptime(text, fmt).replace(tzinfo=timezone.utc)
        except ValueError:
            continue
    raise ValueError(f"bad timestamp {text!r}")


def snapshot_filename(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime(_NAME_FORMAT) + ".json"


def snapshot_to_dict(snapshot: CrawlSnapshot) -> dict:
    records = []
    for r in snapshot.records:
        md = r.metadata
        records.append({
            "public_key": r.public_key,
            "address": str(r.address) if r.address is not None else None,
            "active": r.active,
            "reason": r.reason,
            "block_index": r.block_index,
            "quorum_set": qset_to_json(r.quorum_set),
            "metadata": None if md is None else {
                "organisation": md.organisation,
                "country": md.country,
                "isp": md.isp,
                "source": md.source,
            },
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "timestamp": format_timestamp(snapshot.timestamp),
        "duration_ms": snapshot.duration_ms,
        "bootstrap": [str(a) for a in snapshot.bootstrap],
        "records": records,
    }


def dumps(snapshot: CrawlSnapshot) -> str:
    return json.dumps(snapshot_to_dict(snapshot), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _record_from_dict(obj) -> NodeRecord:
    address = obj["address"]
    qset, _ = qset_from_json(obj["quorum_set"])
    md = obj.get("metadata")
    if md is not None:
        md = NodeMetadata(md["organisation"], md["country"], md["isp"], md["source"])
    block = obj.get("block_index")
    if block is not None and (not isinstance(block, int) or block < 0):
        raise ValueError("bad block_index")
    active = obj["active"]
    if not isinstance(active, bool):
        raise ValueError("active must be a boolean")
    key = obj["public_key"]
    if not isinstance(key, str) or not key:
        raise ValueError("bad public_key")
    return NodeRecord(
        public_key=key,
        address=NodeAddress.parse(address) if address is not None else None,
        quorum_set=qset,
        active=active,
        reason=obj.get("reason"),
        block_index=block,
        metadata=md,
    )


def snapshot_from_dict(obj) -> CrawlSnapshot:
    if not isinstance(obj, dict) or "schema_version" not in obj:
        raise ParseError("not a snapshot document")
    if obj["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionUnsupported(f"schema_version {obj['schema_version']!r}")
    try:
        snapshot = CrawlSnapshot(
            timestamp=parse_timestamp(obj["timestamp"]),
            duration_ms=int(obj["duration_ms"]),
            records=tuple(_record_from_dict(r) for r in obj["records"]),
            bootstrap=tuple(NodeAddress.parse(a) for a in obj["bootstrap"]),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"malformed snapshot: {exc!r}") from None
    validate_snapshot(snapshot)
    return snapshot


def validate_snapshot(snapshot: CrawlSnapshot) -> None:
    keys = [r.public_key for r in snapshot.records]
    if len(set(keys)) != len(keys):
        raise ValidationError("duplicate public keys")
    known = set(keys)
    for r in snapshot.records:
        try:
            validate_quorum_set(r.quorum_set, known)
        except QuorumSetError as exc:
            raise ValidationError(f"record {r.public_key!r}: {exc}") from None


def ensure_store(directory) -> Path:
    path = Path(directory)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StoreUnavailable(f"{path}: {exc}") from None
    if not path.is_dir() or not os.access(path, os.W_OK):
        raise StoreUnavailable(f"{path} is not a writable directory")
    return path


def save_snapshot(snapshot: CrawlSnapshot, directory) -> Path:
    """Write atomically (temp file + rename) and return the final path."""
    path = ensure_store(directory)
    target = path / snapshot_filename(snapshot.timestamp)
    if target.exists():
        raise DuplicateTimestamp(f"{target} already exists")
    data = dumps(snapshot).encode("utf-8")
    try:
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".json", dir=path)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, target)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
    except OSError as exc:
        raise StoreUnavailable(f"{path}: {exc}") from None
    return target


def load_snapshot(path) -> CrawlSnapshot:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return snapshot_from_dict(obj)


def list_series(directory) -> list[Path]:
    path = Path(directory)
    if not path.is_dir():
        raise StoreUnavailable(f"{path} is not a directory")
    out = []
    for entry in path.iterdir():
        if entry.name.startswith("."):
            continue
        if entry.is_file() and _NAME_RE.match(entry.name):
            out.append(entry)
        else:
            log.warning("ignoring non-snapshot entry %s", entry)
    return sorted(out, key=lambda p: p.name)


def bundled_snapshot_path():
    return resources.files("quorumscope") / "data" / "mobilecoin-2021.snapshot.json"


def load_bundled_snapshot() -> CrawlSnapshot:
    return snapshot_from_dict(json.loads(bundled_snapshot_path().read_text(encoding="utf-8")))
