import functools

import pytest

from tdglfem.fe_spaces import FeSystem
from tdglfem.forms import assemble_static
from tdglfem.mesh import DomainSpec, build_domain


@functools.lru_cache(maxsize=None)
def domain(kind="l_shape_with_hole", h=1 / 8):
    hole = None if kind != "l_shape_with_hole" else DomainSpec().hole
    return build_domain(DomainSpec(kind, hole, h))


@functools.lru_cache(maxsize=None)
def system(kind="l_shape_with_hole", h=1 / 8, k=1):
    sys = FeSystem(domain(kind, h), k)
    return sys, assemble_static(sys)


@pytest.fixture(scope="session")
def holed():
    return system("l_shape_with_hole", 1 / 8, 1)


@pytest.fixture(scope="session")
def holed_whitney():
    return system("l_shape_with_hole", 1 / 8, 0)


@pytest.fixture(scope="session")
def lshape():
    return system("l_shape", 1 / 8, 1)


_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record a PASS/FAIL line for an acceptance criterion and return the flag."""
    store = request.config.stash.setdefault(_VERDICTS, {})

    def record(number, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        store[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_VERDICTS, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for n in sorted(store):
            terminalreporter.write_line(store[n])
