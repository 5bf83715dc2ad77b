import numpy as np
import pytest

_CRITERIA: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): label a test as one acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    if rep.when == "call":
        if rep.passed:
            _CRITERIA[name] = "PASSED"
        else:
            _CRITERIA[name] = "SKIPPED" if rep.skipped else "FAILED"
    elif rep.when == "setup" and not rep.passed:
        _CRITERIA[name] = "SKIPPED" if rep.skipped else "FAILED"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, status in _CRITERIA.items():
        terminalreporter.write_line(f"CRITERION {name}: {status}")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
