"""Newline-delimited JSON protocol spoken between the crawler and validators.

::

    request   {"method":"get_latest_msg","id":<u64>}
    response  {"id":<u64>,"result":{"sender_id":..,"block_index":..,"quorum_set":QSET,"signature":..}}
    error     {"id":<u64>,"error":{"code":<int>,"message":<str>}}

    QSET   := {"threshold":<u32>,"members":[MEMBER...]}
    MEMBER := {"type":"node","public_key":<str>,"address":"host:port"}
            | {"type":"inner_set","quorum_set":QSET}

The same QSET shape is reused by topology and snapshot files, where the
member ``address`` is optional.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass, field

from .errors import MalformedResponse, QuorumSetError
from .model import MAX_QSET_DEPTH, QuorumSet, validate_quorum_set

METHOD = "get_latest_msg"
MAX_LINE = 1 << 20


@dataclass(frozen=True, order=True)
class NodeAddress:
    host: str
    port: int

    def __post_init__(self):
        if not self.host:
            raise ValueError("empty host")
        if not isinstance(self.port, int) or not 1 <= self.port <= 65535:
            raise ValueError(f"port {self.port!r} out of range")

    @classmethod
    def parse(cls, text: str) -> "NodeAddress":
        text = text.strip()
        if text.startswith("["):  # [v6]:port
            host, sep, port = text[1:].partition("]:")
        else:
            host, sep, port = text.rpartition(":")
        if not sep or not port.isdigit():
            raise ValueError(f"expected host:port, got {text!r}")
        return cls(host, int(port))

    def __str__(self):
        try:
            if ipaddress.ip_address(self.host).version == 6:
                return f"[{self.host}]:{self.port}"
        except ValueError:
            pass
        return f"{self.host}:{self.port}"


@dataclass(frozen=True)
class ConsensusMsgView:
    sender_id: str
    block_index: int
    quorum_set: QuorumSet
    signature: str
    # public key -> address for every node member at any level
    member_addresses: dict = field(default_factory=dict, compare=False)


# -- quorum set <-> JSON ----------------------------------------------------

def qset_to_json(qset: QuorumSet, addresses=None) -> dict:
    members = []
    for key in qset.node_members:
        m = {"type": "node", "public_key": key}
        if addresses is not None:
            m["address"] = str(addresses[key])
        members.append(m)
    for inner in qset.inner_sets:
        members.append({"type": "inner_set", "quorum_set": qset_to_json(inner, addresses)})
    return {"threshold": qset.threshold, "members": members}


def qset_from_json(obj, *, require_address=False, _depth=1):
    """Parse a QSET object; returns ``(QuorumSet, {public_key: NodeAddress})``.

    Raises ``ValueError`` on any shape problem.
    """
    if _depth > MAX_QSET_DEPTH + 1:
        raise ValueError("quorum set nested too deeply")
    if not isinstance(obj, dict):
        raise ValueError("quorum set must be an object")
    threshold = obj.get("threshold")
    members = obj.get("members")
    if not isinstance(threshold, int) or isinstance(threshold, bool) or threshold < 0:
        raise ValueError(f"bad threshold {threshold!r}")
    if not isinstance(members, list):
        raise ValueError("members must be a list")
    nodes, inner, addresses = [], [], {}
    for m in members:
        if not isinstance(m, dict):
            raise ValueError("member must be an object")
        kind = m.get("type")
        if kind == "node":
            key = m.get("public_key")
            if not isinstance(key, str) or not key:
                raise ValueError(f"bad public_key {key!r}")
            nodes.append(key)
            if "address" in m:
                addresses.setdefault(key, NodeAddress.parse(str(m["address"])))
            elif require_address:
                raise ValueError(f"member {key!r} has no address")
        elif kind == "inner_set":
            sub, sub_addr = qset_from_json(
                m.get("quorum_set"), require_address=require_address, _depth=_depth + 1
            )
            inner.append(sub)
            for k, a in sub_addr.items():
                addresses.setdefault(k, a)
        else:
            raise ValueError(f"unknown member type {kind!r}")
    return QuorumSet(threshold, tuple(nodes), tuple(inner)), addresses


# -- messages ---------------------------------------------------------------

def encode(obj) -> bytes:
    return (json.dumps(obj, separators=(",", ":"), sort_keys=True) + "\n").encode("utf-8")


def request(request_id: int) -> bytes:
    return encode({"method": METHOD, "id": request_id})


def result_message(request_id, view: ConsensusMsgView, addresses) -> bytes:
    return encode({
        "id": request_id,
        "result": {
            "sender_id": view.sender_id,
            "block_index": view.block_index,
            "quorum_set": qset_to_json(view.quorum_set, addresses),
            "signature": view.signature,
        },
    })


def error_message(request_id, code: int, message: str) -> bytes:
    return encode({"id": request_id, "error": {"code": code, "message": message}})


def parse_response(line: bytes, expected_id: int) -> ConsensusMsgView:
    """Decode and validate one response line, raising MalformedResponse."""
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedResponse(f"not JSON: {exc}") from None
    if not isinstance(obj, dict) or obj.get("id") != expected_id:
        raise MalformedResponse("response id does not match request")
    if "error" in obj:
        err = obj["error"] if isinstance(obj["error"], dict) else {}
        raise MalformedResponse(f"remote error {err.get('code')}: {err.get('message')}")
    res = obj.get("result")
    if not isinstance(res, dict):
        raise MalformedResponse("missing result")
    sender = res.get("sender_id")
    block = res.get("block_index")
    sig = res.get("signature")
    if not isinstance(sender, str) or not sender:
        raise MalformedResponse("bad sender_id")
    if not isinstance(block, int) or isinstance(block, bool) or block < 0:
        raise MalformedResponse("bad block_index")
    if not isinstance(sig, str):
        raise MalformedResponse("bad signature")
    try:
        qset, addresses = qset_from_json(res.get("quorum_set"), require_address=True)
        validate_quorum_set(qset)
    except (ValueError, QuorumSetError) as exc:
        raise MalformedResponse(f"invalid quorum set: {exc}") from None
    return ConsensusMsgView(sender, block, qset, sig, addresses)


def parse_request(line: bytes):
    """Return the request id, or raise ValueError for anything but get_latest_msg."""
    obj = json.loads(line.decode("utf-8"))
    if not isinstance(obj, dict):
        raise ValueError("request must be an object")
    rid = obj.get("id")
    if not isinstance(rid, int) or isinstance(rid, bool) or rid < 0:
        raise ValueError("bad id")
    if obj.get("method") != METHOD:
        raise LookupError(rid)
    return rid
