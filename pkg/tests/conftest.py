import numpy as np
import pytest

from stylviz import ChartSpec, MockBackend, PromptSpec, WorkflowConfig
from stylviz.chart import Edge, Node, Series


@pytest.fixture
def mock():
    return MockBackend()


@pytest.fixture
def cfg():
    return WorkflowConfig()


@pytest.fixture
def bar3():
    return ChartSpec.bar([3, 1, 2])


@pytest.fixture
def food_prompts():
    return PromptSpec("a bar chart of snacks", ["fries", "hamburgers", "cupcakes"], background="a picnic table")


def network_spec(n=4, seed=0):
    rng = np.random.default_rng(seed)
    nodes = [Node(f"n{i}", position=tuple(rng.uniform(0, 1, 2))) for i in range(n)]
    edges = [Edge(f"n{i}", f"n{i + 1}") for i in range(n - 1)]
    return ChartSpec("network", nodes=nodes, edges=edges)


def area_spec():
    return ChartSpec("area", series=[Series([0, 1, 2, 3], [1, 3, 2, 2]), Series([0, 1, 2, 3], [2, 1, 2, 3])])


def rand_image(rng, h, w, channels=3):
    return np.round(rng.uniform(0, 1, (h, w, channels)) * 255) / 255


# -- acceptance summary: one line per criterion ----------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for mark in getattr(report, "criterion", ()):
        _CRITERIA[mark] = (report.outcome, report.duration)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        report.criterion = [(m.args[0], m.args[1])]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (n, title), (outcome, duration) in sorted(_CRITERIA.items()):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {status}  {title} ({duration:.2f}s)")
