import itertools

import pytest
from hypothesis import HealthCheck, settings

from polytower.field import make_rng

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def all_points(p, n):
    return list(itertools.product(range(p), repeat=n))


@pytest.fixture
def rng():
    return make_rng(12345)


# -- acceptance reporting ------------------------------------------------------
# Tests marked @pytest.mark.criterion(k, "title") are summarized as one
# pass/fail line per criterion at the end of the run.

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "seen": False})
    if rep.when == "call" or rep.failed:
        entry["seen"] = True
        if rep.failed:
            entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["ok"] and e["seen"] else ("FAIL" if e["seen"] else "NOT RUN")
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {e['title']}")
