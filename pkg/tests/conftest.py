import numpy as np
import pytest
from hypothesis import settings

from ghostradar.array import example_sla, ula

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

_RESULTS = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _RESULTS.append((marker.args[0], report.outcome, item.name, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, outcome, name, detail in sorted(_RESULTS):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {name}  {detail}")


@pytest.fixture
def geom():
    return ula()


@pytest.fixture
def sla():
    return example_sla()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
