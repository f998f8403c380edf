"""A loopback validator network for crawl and fault-injection tests.

Every node listens on its own port and answers ``get_latest_msg`` with its
configured quorum set.  A node that is down has no listening socket at all,
so clients see a refused connection, exactly like an unreachable validator.

Topology file (JSON)::

    {"name": "mobilecoin-2021",
     "nodes": [{"public_key": "MC1", "address": "127.0.0.1:18101", "block_index": 1000,
                "quorum_set": QSET, "latency_ms": 0, "malformed": null}, ...],
     "down": ["Dre"]}

QSET is the wire shape; member addresses may be omitted since they are
resolved from the node table.  ``malformed`` is one of ``bad_threshold``,
``garbage`` or ``wrong_id`` for adversarial fixtures.
"""

from __future__ import annotations

import hashlib
import ipaddress
import json
import logging
import socket
import threading
import time
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from . import wire
from .errors import BindFailed, ParseError, QuorumSetError, UnknownNode, ValidationError
from .model import QuorumSet, validate_quorum_set
from .wire import ConsensusMsgView, NodeAddress

log = logging.getLogger(__name__)

MALFORMED_MODES = ("bad_threshold", "garbage", "wrong_id")


@dataclass(frozen=True)
class MockNode:
    public_key: str
    address: NodeAddress
    quorum_set: QuorumSet
    block_index: int = 0
    latency_ms: int = 0
    malformed: Optional[str] = None

    @property
    def signature(self) -> str:
        return hashlib.sha256(f"{self.public_key}:{self.block_index}".encode()).hexdigest()


@dataclass(frozen=True)
class Topology:
    name: str
    nodes: tuple[MockNode, ...]
    faults: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "faults", frozenset(self.faults))
        validate_topology(self)

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(n.public_key for n in self.nodes)

    def node(self, key) -> MockNode:
        for n in self.nodes:
            if n.public_key == key:
                return n
        raise UnknownNode(f"no node {key!r} in topology")


def validate_topology(topo: Topology) -> None:
    keys = [n.public_key for n in topo.nodes]
    if len(set(keys)) != len(keys):
        raise ValidationError("duplicate public keys in topology")
    addresses = [n.address for n in topo.nodes]
    if len(set(addresses)) != len(addresses):
        raise ValidationError("duplicate listen addresses in topology")
    known = set(keys)
    for n in topo.nodes:
        try:
            validate_quorum_set(n.quorum_set, known)
        except QuorumSetError as exc:
            raise ValidationError(f"node {n.public_key!r}: {exc}") from None
        if n.malformed is not None and n.malformed not in MALFORMED_MODES:
            raise ValidationError(f"node {n.public_key!r}: unknown malformed mode {n.malformed!r}")
    unknown = set(topo.faults) - known
    if unknown:
        raise ValidationError(f"down list names unknown nodes {sorted(unknown)}")


def topology_from_dict(obj) -> Topology:
    try:
        table = {}
        nodes = []
        for entry in obj["nodes"]:
            qset, member_addr = wire.qset_from_json(entry["quorum_set"])
            node = MockNode(
                public_key=entry["public_key"],
                address=NodeAddress.parse(entry["address"]),
                quorum_set=qset,
                block_index=int(entry.get("block_index", 0)),
                latency_ms=int(entry.get("latency_ms", 0)),
                malformed=entry.get("malformed"),
            )
            nodes.append((node, member_addr))
            table[node.public_key] = node.address
        name = str(obj.get("name", ""))
        down = list(obj.get("down", []))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"malformed topology: {exc!r}") from None
    for node, member_addr in nodes:
        for key, addr in member_addr.items():
            if key in table and table[key] != addr:
                raise ValidationError(f"member {key!r} listed at {addr}, node table says {table[key]}")
    return Topology(name, tuple(n for n, _ in nodes), frozenset(down))


def load_topology(path) -> Topology:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    return topology_from_dict(obj)


def bundled_topology_path():
    return resources.files("quorumscope") / "data" / "mobilecoin-2021.topology.json"


def load_bundled_topology() -> Topology:
    with resources.as_file(bundled_topology_path()) as p:
        return load_topology(p)


# ---------------------------------------------------------------------------
# serving
# ---------------------------------------------------------------------------

def _listen(host, port):
    family = socket.AF_INET
    try:
        if ipaddress.ip_address(host).version == 6:
            family = socket.AF_INET6
    except ValueError:
        pass
    try:
        return socket.create_server((host, port), family=family, backlog=64)
    except OSError as exc:
        raise BindFailed(f"cannot bind {host}:{port}: {exc.strerror or exc}") from None


class _NodeServer:
    def __init__(self, net, node: MockNode, host: str, port: int):
        self.net = net
        self.node = node
        self.bind = (host, port)
        self.address = None
        self.lock = threading.Lock()
        self.listener = None
        self.thread = None
        self.conns = set()

    @property
    def up(self):
        return self.listener is not None

    def open(self):
        with self.lock:
            if self.listener is not None:
                return
            sock = _listen(*self.bind)
            self.address = NodeAddress(self.bind[0], sock.getsockname()[1])
            # reopening after a fault reuses the same port
            self.bind = (self.address.host, self.address.port)
            self.listener = sock
            self.thread = threading.Thread(
                target=self._accept_loop, args=(sock,), daemon=True,
                name=f"mocknet-{self.node.public_key}",
            )
            self.thread.start()

    def close(self):
        with self.lock:
            sock, self.listener = self.listener, None
            thread, self.thread = self.thread, None
            conns, self.conns = self.conns, set()
        if sock is None:
            return
        try:
            sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        sock.close()
        for c in conns:
            try:
                c.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            c.close()
        if thread is not None:
            thread.join(timeout=2)

    def _accept_loop(self, sock):
        while True:
            try:
                conn, _ = sock.accept()
            except OSError:
                return
            with self.lock:
                if self.listener is not sock:
                    conn.close()
                    return
                self.conns.add(conn)
            threading.Thread(target=self._serve_conn, args=(conn,), daemon=True).start()

    def _reply(self, line: bytes) -> bytes:
        node = self.node
        try:
            rid = wire.parse_request(line)
        except LookupError as exc:
            return wire.error_message(exc.args[0], -32601, "method not found")
        except (ValueError, UnicodeDecodeError):
            return wire.error_message(0, -32700, "parse error")
        if node.malformed == "garbage":
            return b"this is not a consensus message\n"
        if node.malformed == "wrong_id":
            rid += 1
        qset = node.quorum_set
        if node.malformed == "bad_threshold":
            qset = replace(qset, threshold=qset.constituents + 3)
        view = ConsensusMsgView(node.public_key, node.block_index, qset, node.signature)
        return wire.result_message(rid, view, self.net.addresses)

    def _serve_conn(self, conn):
        buf = b""
        try:
            conn.settimeout(30)
            while True:
                chunk = conn.recv(65536)
                if not chunk:
                    return
                buf += chunk
                while b"\n" in buf:
                    line, buf = buf.split(b"\n", 1)
                    if not line.strip():
                        continue
                    reply = self._reply(line)
                    if self.node.latency_ms:
                        time.sleep(self.node.latency_ms / 1000)
                    conn.sendall(reply)
        except OSError:
            pass
        finally:
            with self.lock:
                self.conns.discard(conn)
            conn.close()


class MockNetwork:
    """Running mock network; use as a context manager or call :meth:`close`."""

    def __init__(self, topology: Topology, *, ephemeral=False):
        self.topology = topology
        self._servers = {}
        try:
            for node in topology.nodes:
                port = 0 if ephemeral else node.address.port
                server = _NodeServer(self, node, node.address.host, port)
                server.open()
                self._servers[node.public_key] = server
        except BindFailed:
            self.close()
            raise
        # the port of a down node stays known so quorum sets can still point at it
        for key in topology.faults:
            self._servers[key].close()

    @property
    def addresses(self) -> dict[str, NodeAddress]:
        return {k: s.address for k, s in self._servers.items()}

    def address(self, key) -> NodeAddress:
        return self._server(key).address

    def is_up(self, key) -> bool:
        return self._server(key).up

    def _server(self, key):
        try:
            return self._servers[key]
        except KeyError:
            raise UnknownNode(f"no node {key!r} in topology") from None

    def inject_fault(self, key: str, state: str) -> bool:
        """Bring a node ``"up"`` or ``"down"``; effective when this returns."""
        server = self._server(key)
        if state == "down":
            server.close()
        elif state == "up":
            server.open()
        else:
            raise ValueError(f"state must be 'up' or 'down', not {state!r}")
        return True

    def close(self):
        for s in self._servers.values():
            s.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def serve(topology: Topology, *, ephemeral=False) -> MockNetwork:
    """Start serving; ``ephemeral`` binds OS-chosen ports instead of the configured ones."""
    return MockNetwork(topology, ephemeral=ephemeral)


def inject_fault(handle: MockNetwork, node_key: str, state: str) -> bool:
    return handle.inject_fault(node_key, state)


class ControlServer:
    """Line-based fault injection: ``{"node": key, "state": "up"|"down"}``."""

    def __init__(self, net: MockNetwork, host: str, port: int = 0):
        self.net = net
        self._sock = _listen(host, port)
        self.address = NodeAddress(host, self._sock.getsockname()[1])
        self._thread = threading.Thread(target=self._loop, daemon=True, name="mocknet-control")
        self._thread.start()

    def _loop(self):
        while True:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            threading.Thread(target=self._handle, args=(conn,), daemon=True).start()

    def _command(self, line):
        try:
            cmd = json.loads(line)
            self.net.inject_fault(cmd["node"], cmd["state"])
        except (ValueError, KeyError, TypeError) as exc:
            return {"ok": False, "error": str(exc)}
        return {"ok": True}

    def _handle(self, conn):
        with conn:
            f = conn.makefile("rwb")
            for line in f:
                if not line.strip():
                    continue
                f.write(wire.encode(self._command(line)))
                f.flush()

    def close(self):
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        self._thread.join(timeout=2)
