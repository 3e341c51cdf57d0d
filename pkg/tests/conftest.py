import pytest

_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    key = (number, title)
    if rep.when == "setup" and rep.skipped:
        _results[key] = "SKIP"
    elif rep.when == "call":
        state = "SKIP" if rep.skipped else ("PASS" if rep.passed else "FAIL")
        if _results.get(key) in (None, "PASS") or state == "FAIL":
            _results[key] = state
        for name, value in item.user_properties:
            if name == "detail":
                _results.setdefault(("detail",) + key, []).append(value)


def pytest_terminal_summary(terminalreporter):
    rows = sorted(k for k in _results if k[0] != "detail")
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in rows:
        line = f"criterion {number}: {_results[(number, title)]:4s} {title}"
        details = _results.get(("detail", number, title))
        if details:
            line += "  [" + "; ".join(details) + "]"
        terminalreporter.write_line(line)
