from fractions import Fraction

import pytest

from bisym.genset import HElem, enumerate_h, make_family
from bisym.weights import Weights

SQRT2, SQRT3 = HElem.unit(0), HElem.unit(1)


def h(**kw) -> HElem:
    """h(r2=1, r3=2) -> {sqrt2: 1, sqrt3: 2} in the default family."""
    ids = {"r2": 0, "r3": 1}
    return HElem({ids[k]: Fraction(v) for k, v in kw.items()})


@pytest.fixture(scope="session")
def fam23():
    return make_family([(1, 2), (1, 3)], (1, 2))


@pytest.fixture(scope="session")
def depth1(fam23):
    return enumerate_h(fam23, Weights.of([1, 1]), 1, (1, 4))


@pytest.fixture(scope="session")
def depth2_pool(fam23):
    return enumerate_h(fam23, Weights.of([1, 1]), 2, (0, 16))


_LOG_KEY = pytest.StashKey[list]()


class _Criterion:
    def __init__(self, log, nodeid):
        self.log = log
        self.nodeid = nodeid
        self.recorded = False

    def record(self, number: int, title: str, checks: dict):
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        detail = "" if ok else " (failed: " + "; ".join(failed) + ")"
        self.log.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}{detail}")
        self.recorded = True
        assert ok, failed


@pytest.fixture
def criterion(request):
    log = request.config.stash.setdefault(_LOG_KEY, [])
    c = _Criterion(log, request.node.nodeid)
    yield c
    if not c.recorded:
        log.append(f"[FAIL] {request.node.name}: raised before completing")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_LOG_KEY, [])
    if log:
        terminalreporter.section("acceptance criteria")
        for line in sorted(log, key=lambda s: (int(s.split("criterion ")[1].split(":")[0])
                                               if "criterion " in s else 99)):
            terminalreporter.write_line(line)
