import random

import pytest

from quorumscope import Fbas, QuorumSet
from quorumscope.mocknet import load_bundled_topology, serve
from quorumscope.snapshots import load_bundled_snapshot


def five_node_fbas():
    return Fbas(
        ("0", "1", "2", "3", "4"),
        {
            "0": QuorumSet(2, ("1", "2")),
            "1": QuorumSet(2, ("0", "2", "3")),
            "2": QuorumSet(3, ("0", "1", "3", "4")),
            "3": QuorumSet(3, ("0", "1", "2", "4")),
            "4": QuorumSet(3, ("0", "1", "2", "3")),
        },
    )


def symmetric_fbas(n, t):
    """n nodes, each requiring t of all n (itself included)."""
    nodes = tuple(str(i) for i in range(n))
    return Fbas(nodes, {v: QuorumSet(t, nodes) for v in nodes})


def random_fbas(rng: random.Random, max_nodes=6, inner_rate=0.2, inactive_rate=0.0):
    n = rng.randint(1, max_nodes)
    nodes = tuple(str(i) for i in range(n))
    qsets = {}
    for v in nodes:
        members = rng.sample(nodes, rng.randint(1, n))
        inner = ()
        if rng.random() < inner_rate:
            pool = [m for m in nodes if m not in members] or list(nodes)
            sub = rng.sample(pool, rng.randint(1, len(pool)))
            inner = (QuorumSet(rng.randint(1, len(sub)), sub),)
        qsets[v] = QuorumSet(rng.randint(1, len(members) + len(inner)), members, inner)
    active = {v: rng.random() >= inactive_rate for v in nodes}
    if not any(active.values()):
        active[nodes[0]] = True
    return Fbas(nodes, qsets, active)


def sets_of(family):
    return {frozenset(s.labels()) for s in family.sets}


@pytest.fixture
def five():
    return five_node_fbas()


@pytest.fixture(scope="session")
def fixture_snapshot():
    return load_bundled_snapshot()


@pytest.fixture(scope="session")
def fixture_fbas(fixture_snapshot):
    return fixture_snapshot.to_fbas()


@pytest.fixture
def mocknet():
    with serve(load_bundled_topology(), ephemeral=True) as net:
        yield net


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    # a setup error or a failing call both count against the criterion
    if report.when == "call" or report.failed:
        status = "PASS" if report.passed else "FAIL"
        ACCEPTANCE_RESULTS[props["criterion"]] = (status, props.get("title", ""))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        status, title = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")
