"""Per-criterion PASS/FAIL summary for the acceptance suite.

Tests tagged ``@pytest.mark.criterion(n)`` are grouped by ``n``; a criterion
passes only if every test carrying its number passes. Details recorded with
``record_property("detail", ...)`` are echoed next to the verdict.
"""

from collections import defaultdict

import pytest

_results = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        details = [v for k, v in item.user_properties if k == "detail"]
        _results[marker.args[0]].append((item.name, rep.passed, details))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_results):
        parts = _results[n]
        ok = all(passed for _, passed, _ in parts)
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}")
        for name, passed, details in parts:
            text = "; ".join(details)
            tr.write_line(f"    {'ok  ' if passed else 'FAIL'} {name}  {text}")
