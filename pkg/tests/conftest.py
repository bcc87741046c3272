import pytest

_RESULTS: dict[int, list[str]] = {}


def _criterion(item) -> int | None:
    mark = item.get_closest_marker("criterion")
    return int(mark.args[0]) if mark else None


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    n = _criterion(item)
    if n is None:
        return
    if rep.when == "call" or (rep.when == "setup" and (rep.skipped or rep.failed)):
        _RESULTS.setdefault(n, []).append(rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        outcomes = _RESULTS[n]
        if "failed" in outcomes:
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIPPED"
        else:
            status = "PASS"
        terminalreporter.write_line(f"ACCEPTANCE criterion {n}: {status}")
