import pytest
from hypothesis import HealthCheck, settings

from twentyq.channels import ChannelModel, SizeFunction

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def bsc():
    """Reference binary channel: zeta = 0.2, f(q) = 2q + 0.5."""
    return ChannelModel.bsc(0.2, SizeFunction(2.0, 0.5))


@pytest.fixture(scope="session")
def awgn():
    return ChannelModel.awgn(2.0, SizeFunction(2.0, 0.5))


# ---- acceptance report ----------------------------------------------------------------------------

_CRITERIA: dict = {}


@pytest.fixture
def criterion(request):
    """Returns a callable that appends a detail string to this criterion's report line."""
    marker = request.node.get_closest_marker("criterion")
    entry = _CRITERIA.setdefault(request.node.nodeid, {"number": marker.args[0], "title": marker.args[1],
                                                       "detail": [], "passed": None})
    return entry["detail"].append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.nodeid in _CRITERIA:
        _CRITERIA[item.nodeid]["passed"] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for e in sorted(_CRITERIA.values(), key=lambda e: e["number"]):
        status = "PASS" if e["passed"] else "FAIL"
        terminalreporter.write_line(f"{status} criterion {e['number']} ({e['title']}): " + "; ".join(e["detail"]))
