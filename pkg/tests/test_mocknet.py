import json
import socket
from concurrent.futures import ThreadPoolExecutor

import pytest

from quorumscope.crawler import query_node
from quorumscope.errors import BindFailed, ConnectFailed, ParseError, UnknownNode, ValidationError
from quorumscope.mocknet import (
    ControlServer,
    inject_fault,
    load_bundled_topology,
    load_topology,
    serve,
    topology_from_dict,
)


def _topology_dict():
    return {
        "name": "pair",
        "nodes": [
            {"public_key": "a", "address": "127.0.0.1:1",
             "quorum_set": {"threshold": 1, "members": [{"type": "node", "public_key": "b"}]}},
            {"public_key": "b", "address": "127.0.0.1:2",
             "quorum_set": {"threshold": 1, "members": [{"type": "node", "public_key": "a"}]}},
        ],
    }


def test_bundled_topology():
    topo = load_bundled_topology()
    assert len(topo.nodes) == 10
    assert all(n.quorum_set.threshold == 7 and len(n.quorum_set.node_members) == 9
               for n in topo.nodes)


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_topology(bad)
    with pytest.raises(ParseError):
        topology_from_dict({"nodes": [{"public_key": "a"}]})


@pytest.mark.parametrize("mutate", [
    lambda d: d["nodes"][1].update(public_key="a"),
    lambda d: d["nodes"][1].update(address="127.0.0.1:1"),
    lambda d: d["nodes"][0]["quorum_set"]["members"].append({"type": "node", "public_key": "zz"}),
    lambda d: d["nodes"][0]["quorum_set"].update(threshold=4),
    lambda d: d["nodes"][0].update(malformed="rude"),
    lambda d: d.update(down=["zz"]),
])
def test_validation_errors(mutate):
    d = _topology_dict()
    mutate(d)
    with pytest.raises(ValidationError):
        topology_from_dict(d)


def test_initially_down(tmp_path):
    d = _topology_dict()
    d["down"] = ["b"]
    with serve(topology_from_dict(d), ephemeral=True) as net:
        assert net.is_up("a") and not net.is_up("b")
        with pytest.raises(ConnectFailed):
            query_node(net.address("b"), 500)


def test_fault_injection_keeps_port(mocknet):
    addr = mocknet.address("LNF")
    assert inject_fault(mocknet, "LNF", "down")
    with pytest.raises(ConnectFailed):
        query_node(addr, 500)
    assert inject_fault(mocknet, "LNF", "up")
    assert mocknet.address("LNF") == addr
    assert query_node(addr, 500).sender_id == "LNF"


def test_fault_injection_errors(mocknet):
    with pytest.raises(UnknownNode):
        mocknet.inject_fault("nobody", "down")
    with pytest.raises(ValueError):
        mocknet.inject_fault("MC1", "sideways")


def test_bind_failed(mocknet):
    with pytest.raises(BindFailed):
        ControlServer(mocknet, "127.0.0.1", mocknet.address("MC1").port)


def test_control_server(mocknet):
    control = ControlServer(mocknet, "127.0.0.1")
    try:
        with socket.create_connection((control.address.host, control.address.port), 2) as s:
            f = s.makefile("rwb")
            f.write(b'{"node": "MC2", "state": "down"}\n')
            f.flush()
            assert json.loads(f.readline()) == {"ok": True}
            assert not mocknet.is_up("MC2")
            f.write(b'{"node": "ghost", "state": "down"}\n')
            f.flush()
            assert json.loads(f.readline())["ok"] is False
    finally:
        control.close()


def test_concurrent_clients(mocknet):
    addr = mocknet.address("Bin")
    with ThreadPoolExecutor(16) as pool:
        views = list(pool.map(lambda _: query_node(addr, 2000), range(16)))
    assert {v.sender_id for v in views} == {"Bin"}


def test_pipelined_requests(mocknet):
    addr = mocknet.address("MC3")
    with socket.create_connection((addr.host, addr.port), 2) as s:
        s.sendall(b'{"id":1,"method":"get_latest_msg"}\n{"id":2,"method":"get_latest_msg"}\n')
        f = s.makefile("rb")
        ids = [json.loads(f.readline())["id"] for _ in range(2)]
    assert ids == [1, 2]


def test_unknown_method_gets_error(mocknet):
    addr = mocknet.address("MC3")
    with socket.create_connection((addr.host, addr.port), 2) as s:
        s.sendall(b'{"id":4,"method":"nope"}\n')
        reply = json.loads(s.makefile("rb").readline())
    assert reply["id"] == 4 and reply["error"]["code"] == -32601
