import functools

import pytest

from hitchlab.surface import triangulate

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def mesh_at(level):
    return triangulate(level=level)


@pytest.fixture(scope="session")
def mesh0():
    return mesh_at(0)


@pytest.fixture(scope="session")
def mesh1():
    return mesh_at(1)


@pytest.fixture(scope="session")
def mesh2():
    return mesh_at(2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
