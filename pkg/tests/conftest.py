from collections import defaultdict

_outcomes: dict[int, list[bool]] = defaultdict(list)
_criterion_of: dict[str, int] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criterion_of[item.nodeid] = int(mark.args[0])


def pytest_runtest_logreport(report):
    k = _criterion_of.get(report.nodeid)
    if k is None:
        return
    if report.when == "call" or report.failed:
        _outcomes[k].append(report.passed and not report.skipped)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_outcomes):
        ok = all(_outcomes[k])
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}")
