import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from ghsdensity.domains import DomainSpec, generate
from ghsdensity.mmgraph import MetricMeasureGraph
from ghsdensity.whitney import build_cover

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def domain(shape, h):
    return generate(DomainSpec(shape, h))


@functools.lru_cache(maxsize=None)
def cover(shape, h):
    return build_cover(domain(shape, h))


def path_graph(n, boundary=(0,), length=1.0, mu=1.0):
    """Path 0-1-...-(n-1) with the given boundary vertices."""
    edges = np.array([[i, i + 1] for i in range(n - 1)])
    b = np.zeros(n, dtype=bool)
    b[list(boundary)] = True
    return MetricMeasureGraph(np.full(n, float(mu)), b, edges, np.full(n - 1, float(length)))


def vertex_at(g, x, y):
    return int(np.argmin(np.hypot(g.xy[:, 0] - x, g.xy[:, 1] - y)))


@st.composite
def random_graphs(draw, max_n=24):
    """Connected simple graphs with random lengths; vertex 0 is on the boundary."""
    n = draw(st.integers(3, max_n))
    parents = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    pairs = {(p, i) for i, p in zip(range(1, n), parents)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=n))
    for a, b in extra:
        if a != b:
            pairs.add((min(a, b), max(a, b)))
    edges = np.array(sorted(pairs))
    lengths = np.array(draw(st.lists(st.floats(0.1, 3.0), min_size=len(edges), max_size=len(edges))))
    mu = np.array(draw(st.lists(st.floats(0.1, 2.0), min_size=n, max_size=n)))
    boundary = np.zeros(n, dtype=bool)
    boundary[0] = True
    # extra boundary vertices among those not needed to keep the domain non-empty
    for v in draw(st.lists(st.integers(1, n - 1), max_size=n // 3)):
        boundary[v] = True
    if boundary.all():
        boundary[n - 1] = False
    touches = boundary[edges[:, 0]] != boundary[edges[:, 1]]
    if not touches.any():
        boundary[:] = False
        boundary[0] = True
    return MetricMeasureGraph(mu, boundary, edges, lengths)


@pytest.fixture(scope="session")
def square01():
    return domain("square", 0.1)


@pytest.fixture(scope="session")
def square005():
    return domain("square", 0.05)


# -- acceptance summary ----------------------------------------------------------------------

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    props = dict(report.user_properties)
    label = props.get("criterion", report.nodeid.split("::")[-1])
    status = "PASS" if report.passed else "FAIL"
    _ACCEPTANCE[label] = f"{label}: {status}  {props.get('detail', '')}".rstrip()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(_ACCEPTANCE[label])
