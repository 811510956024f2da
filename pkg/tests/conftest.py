from collections import defaultdict

_criteria = {}
_outcomes = defaultdict(list)


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criteria[item.nodeid] = mark.args


def pytest_runtest_logreport(report):
    if report.nodeid not in _criteria:
        return
    if report.when == "call" or report.failed or report.skipped:
        number, label = _criteria[report.nodeid]
        details = [f"{k}={v}" for k, v in report.user_properties]
        _outcomes[(number, label)].append((report.outcome, details))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for (number, label), runs in sorted(_outcomes.items()):
        ok = all(outcome == "passed" for outcome, _ in runs)
        details = "; ".join(d for _, ds in runs for d in ds)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number} ({label}): {details}")
