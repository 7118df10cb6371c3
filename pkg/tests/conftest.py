import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

from corpus import node_pair, node_pair_loop  # noqa: E402


@pytest.fixture(scope="session")
def node_eb():
    return node_pair()


@pytest.fixture(scope="session")
def node_loop(node_eb):
    return node_pair_loop(node_eb)


@pytest.fixture(scope="session")
def node_gamma0(node_eb, node_loop):
    from branchlab.branching import build_gamma0

    x0 = node_loop.interior_point()
    sol, period = build_gamma0(node_eb, node_loop, x0, periods=10)
    return x0, sol, period


@pytest.fixture(scope="session")
def node_family(node_eb, node_loop, node_gamma0):
    from branchlab.branching import gamma1_family

    x0 = node_gamma0[0]
    return gamma1_family(node_eb, node_loop, x0, 8, periods=10)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
