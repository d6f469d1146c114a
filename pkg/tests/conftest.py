"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
import pytest

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.fixture
def measured(request):
    """Dict of measured values reported next to the criterion's PASS/FAIL line."""
    d = {}
    request.node._measured = d
    return d


def _fmt(v):
    return f"{v:.3g}" if isinstance(v, float) else str(v)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.skipped:
        return
    if rep.when != "call" and rep.passed:
        return
    n, title = mark.args
    detail = ", ".join(f"{k}={_fmt(v)}" for k, v in getattr(item, "_measured", {}).items())
    _, ok, details = _CRITERIA.get(n, (title, True, []))
    if detail:
        details.append(detail)
    _CRITERIA[n] = (title, ok and rep.passed, details)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, details = _CRITERIA[n]
        line = f"criterion {n:>2}  {'PASS' if ok else 'FAIL'}  {title}"
        if details:
            line += "  [" + "; ".join(details) + "]"
        terminalreporter.write_line(line)
