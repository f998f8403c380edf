"""Attribute crawled nodes to organisations, countries and ISPs.

Organisations come from hostname suffix rules, country and ISP from a
CIDR table.  Hostnames are turned into IPs with an offline hosts table
(IP-literal addresses need none).  Anything the tables miss can be handed
to an optional resolver; without one it stays ``"unknown"``.
"""

from __future__ import annotations

import csv
import ipaddress
import logging
from dataclasses import dataclass, replace
from importlib import resources
from typing import Mapping, Optional, Protocol

from .errors import InvalidIp
from .model import Grouping

log = logging.getLogger(__name__)

UNKNOWN = "unknown"
SOURCES = ("table", "resolver", "unknown")


@dataclass(frozen=True)
class NodeMetadata:
    organisation: str = UNKNOWN
    country: str = UNKNOWN
    isp: str = UNKNOWN
    source: str = "unknown"

    def __post_init__(self):
        for name in ("organisation", "country", "isp"):
            if not getattr(self, name):
                raise ValueError(f"empty {name}")
        if self.source not in SOURCES:
            raise ValueError(f"bad source {self.source!r}")


@dataclass(frozen=True)
class OrgRuleTable:
    rules: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        rules = tuple((str(s), str(o)) for s, o in self.rules)
        for suffix, org in rules:
            if not suffix or not org:
                raise ValueError("org rules need a non-empty suffix and organisation")
        object.__setattr__(self, "rules", rules)


@dataclass(frozen=True)
class IpMetaTable:
    entries: tuple = ()  # (ip_network, country, isp), most specific first

    def __post_init__(self):
        parsed = []
        for pos, (cidr, country, isp) in enumerate(self.entries):
            net = cidr if isinstance(cidr, (ipaddress.IPv4Network, ipaddress.IPv6Network)) \
                else ipaddress.ip_network(cidr, strict=True)
            if not (len(country) == 2 and country.isalpha() and country.isupper()):
                raise ValueError(f"country {country!r} is not ISO 3166-1 alpha-2")
            if not isp:
                raise ValueError(f"empty isp for {net}")
            parsed.append((net, country, isp, pos))
        # longest prefix first, file order among equals
        parsed.sort(key=lambda e: (-e[0].prefixlen, e[3]))
        object.__setattr__(self, "entries", tuple(e[:3] for e in parsed))


class IpResolver(Protocol):
    """Live lookup seam.  Must not have side effects; may raise or return None."""

    def lookup(self, ip: str, timeout: float) -> Optional[tuple[str, str]]: ...


# -- table loading ----------------------------------------------------------

def _read_csv(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [c.strip() for c in first] != header:
            raise ValueError(f"{path}: expected header {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} columns")
            yield [c.strip() for c in row]


def load_org_table(path) -> OrgRuleTable:
    return OrgRuleTable(tuple(_read_csv(path, ["hostname_suffix", "organisation"])))


def load_ip_table(path) -> IpMetaTable:
    return IpMetaTable(tuple(_read_csv(path, ["cidr", "country", "isp"])))


def load_hosts_table(path) -> dict[str, str]:
    hosts = {}
    for host, ip in _read_csv(path, ["hostname", "ip"]):
        ipaddress.ip_address(ip)
        hosts[host.lower()] = ip
    return hosts


def _bundled(name):
    return resources.files("quorumscope") / "data" / name


def bundled_org_table() -> OrgRuleTable:
    with resources.as_file(_bundled("orgs.csv")) as p:
        return load_org_table(p)


def bundled_ip_table() -> IpMetaTable:
    with resources.as_file(_bundled("ipmeta.csv")) as p:
        return load_ip_table(p)


def bundled_hosts() -> dict[str, str]:
    with resources.as_file(_bundled("hosts.csv")) as p:
        return load_hosts_table(p)


# -- lookups ----------------------------------------------------------------

def resolve_org(hostname: Optional[str], table: OrgRuleTable) -> str:
    if not hostname:
        return UNKNOWN
    host = hostname.lower().rstrip(".")
    for suffix, org in table.rules:
        if host.endswith(suffix.lower()):
            return org
    return UNKNOWN


def lookup_ip(ip: str, table: IpMetaTable) -> tuple[str, str]:
    try:
        addr = ipaddress.ip_address(ip)
    except ValueError:
        raise InvalidIp(f"{ip!r} is not an IP address") from None
    for net, country, isp in table.entries:
        if addr.version == net.version and addr in net:
            return country, isp
    return UNKNOWN, UNKNOWN


def _is_ip(host):
    try:
        ipaddress.ip_address(host)
        return True
    except ValueError:
        return False


def describe_node(host: Optional[str], org_table: OrgRuleTable, ip_table: IpMetaTable,
                  resolver: Optional[IpResolver] = None, hosts: Mapping[str, str] = None,
                  timeout: float = 1.0) -> NodeMetadata:
    if host is None:
        return NodeMetadata()
    if _is_ip(host):
        hostname, ip = None, host
    else:
        hostname, ip = host, (hosts or {}).get(host.lower())
    org = resolve_org(hostname, org_table)
    country = isp = UNKNOWN
    source = "unknown"
    if ip is not None:
        country, isp = lookup_ip(ip, ip_table)
        if (country, isp) != (UNKNOWN, UNKNOWN):
            source = "table"
        elif resolver is not None:
            try:
                got = resolver.lookup(ip, timeout)
            except Exception as exc:  # any resolver failure degrades to unknown
                log.warning("resolver failed for %s: %s", ip, exc)
                got = None
            if got and got[0] and got[1]:
                country, isp = got
                source = "resolver"
    if source == "unknown" and org != UNKNOWN:
        source = "table"
    return NodeMetadata(org, country, isp, source)


def enrich_snapshot(snapshot, org_table: OrgRuleTable, ip_table: IpMetaTable,
                    resolver: Optional[IpResolver] = None, hosts: Mapping[str, str] = None,
                    timeout: float = 1.0):
    """Return a copy of ``snapshot`` with NodeMetadata on every record."""
    records = []
    for r in snapshot.records:
        host = r.address.host if r.address is not None else None
        md = describe_node(host, org_table, ip_table, resolver, hosts, timeout)
        records.append(replace(r, metadata=md))
    return snapshot.with_records(records)


_KIND_FIELD = {"organisation": "organisation", "isp": "isp", "country": "country"}


def grouping_from_snapshot(snapshot, kind: str) -> Grouping:
    """Group nodes by a metadata field.

    Nodes with unknown metadata each get their own ``unknown:<key>`` group
    instead of being lumped together.
    """
    if kind == "none":
        return Grouping("none", {r.public_key: r.public_key for r in snapshot.records})
    field_name = _KIND_FIELD[kind]
    assignment = {}
    for r in snapshot.records:
        value = getattr(r.metadata, field_name, UNKNOWN) if r.metadata else UNKNOWN
        assignment[r.public_key] = value if value != UNKNOWN else f"unknown:{r.public_key}"
    return Grouping(kind, assignment)
