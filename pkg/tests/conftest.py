import pytest

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    measured = ", ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA.append((mark.args[0], mark.args[1], rep.passed, measured))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n, text, ok, measured in sorted(_CRITERIA):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}"
        terminalreporter.write_line(line + (f"  [{measured}]" if measured else ""))
