from datetime import datetime, timedelta, timezone

import pytest

from quorumscope import crawler
from quorumscope.crawler import CrawlConfig, crawl, crawl_loop, query_node
from quorumscope.errors import (
    AllBootstrapUnreachable,
    ConnectFailed,
    MalformedResponse,
    QueryTimeout,
    StoreUnavailable,
)
from quorumscope.mocknet import MockNode, Topology, load_bundled_topology, serve
from quorumscope.snapshots import list_series
from quorumscope.wire import NodeAddress


def _free_address():
    import socket
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return NodeAddress("127.0.0.1", s.getsockname()[1])


def _variant(**changes):
    """The bundled topology with one node's settings changed."""
    base = load_bundled_topology()
    key = changes.pop("key")
    nodes = [MockNode(**{**n.__dict__, **changes}) if n.public_key == key else n
             for n in base.nodes]
    return Topology(base.name, nodes)


def test_query_node(mocknet):
    view = query_node(mocknet.address("MC1"), 1000)
    assert view.sender_id == "MC1" and view.block_index == 1000
    assert view.quorum_set.threshold == 7
    assert set(view.member_addresses) == set(mocknet.addresses) - {"MC1"}


def test_query_connect_failed():
    with pytest.raises(ConnectFailed) as info:
        query_node(_free_address(), 500)
    assert info.value.reason == "connect_failed"


def test_query_timeout():
    with serve(_variant(key="MC1", latency_ms=1500), ephemeral=True) as net:
        with pytest.raises(QueryTimeout) as info:
            query_node(net.address("MC1"), 1000)
    assert info.value.reason == "timeout"


@pytest.mark.parametrize("mode", ["bad_threshold", "garbage", "wrong_id"])
def test_query_malformed(mode):
    with serve(_variant(key="MC1", malformed=mode), ephemeral=True) as net:
        with pytest.raises(MalformedResponse):
            query_node(net.address("MC1"), 1000)


def test_crawl_discovers_everyone(mocknet):
    snap = crawl(CrawlConfig((mocknet.address("MC1"),), timeout_ms=1000))
    assert [r.public_key for r in snap.records] == sorted(mocknet.addresses)
    assert snap.active_count == 10
    assert snap.duration_ms < 2000
    fbas = snap.to_fbas()
    assert len(fbas.nodes) == 10


def test_crawl_is_repeatable(mocknet):
    cfg = CrawlConfig((mocknet.address("Na1"),))
    assert crawl(cfg).same_content(crawl(cfg))


def test_crawl_records_down_node(mocknet):
    mocknet.inject_fault("Dre", "down")
    snap = crawl(CrawlConfig((mocknet.address("MC1"),), retries=0))
    dre = snap.record("Dre")
    assert not dre.active and dre.reason.startswith("connect_failed")
    assert dre.address == mocknet.address("Dre")
    assert snap.active_count == 9 and len(snap.records) == 10
    mocknet.inject_fault("Dre", "up")
    assert crawl(CrawlConfig((mocknet.address("MC1"),))).active_count == 10


def test_crawl_records_malformed_node():
    with serve(_variant(key="Blo", malformed="garbage"), ephemeral=True) as net:
        snap = crawl(CrawlConfig((net.address("MC1"),), retries=0))
    assert snap.record("Blo").reason.startswith("malformed_response")
    assert snap.active_count == 9


def test_bootstrap_fallback(mocknet):
    cfg = CrawlConfig((_free_address(), mocknet.address("IBB")), retries=0)
    assert crawl(cfg).active_count == 10


def test_all_bootstrap_unreachable():
    with pytest.raises(AllBootstrapUnreachable):
        crawl(CrawlConfig((_free_address(),), timeout_ms=200, retries=0))


def test_retries_count_attempts():
    calls = []

    def flaky(address, timeout_ms):
        calls.append(address)
        raise ConnectFailed("nope")

    with pytest.raises(AllBootstrapUnreachable):
        crawl(CrawlConfig((NodeAddress("h", 1),), retries=2), query=flaky)
    assert len(calls) == 3


@pytest.mark.parametrize("kwargs", [
    {"bootstrap": ()},
    {"bootstrap": (NodeAddress("h", 1),), "timeout_ms": 0},
    {"bootstrap": (NodeAddress("h", 1),), "parallel": 0},
    {"bootstrap": (NodeAddress("h", 1),), "retries": -1},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        CrawlConfig(**kwargs)


def _clock(monkeypatch):
    start = datetime(2021, 11, 23, 14, 0, tzinfo=timezone.utc)
    ticks = iter(range(1000))
    monkeypatch.setattr(crawler, "_utcnow", lambda: start + timedelta(hours=next(ticks)))


def test_crawl_loop_saves_each_tick(mocknet, tmp_path, monkeypatch):
    _clock(monkeypatch)
    cfg = CrawlConfig((mocknet.address("MC1"),))
    saved = crawl_loop(cfg, 1, tmp_path, max_ticks=3)
    assert len(saved) == 3
    assert list_series(tmp_path) == sorted(saved)


def test_crawl_loop_survives_failed_crawl(mocknet, tmp_path, monkeypatch):
    _clock(monkeypatch)
    calls = []

    def first_fails(cfg):
        calls.append(cfg)
        if len(calls) == 1:
            raise AllBootstrapUnreachable("transient")
        return crawl(cfg)

    cfg = CrawlConfig((mocknet.address("MC1"),))
    saved = crawl_loop(cfg, 1, tmp_path, max_ticks=2, crawl_fn=first_fails)
    assert len(calls) == 2 and len(saved) == 1


def test_crawl_loop_store_unavailable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(StoreUnavailable):
        crawl_loop(CrawlConfig((NodeAddress("h", 1),)), 1, blocker, max_ticks=1)
