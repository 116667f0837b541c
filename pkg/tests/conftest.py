import pytest

CRITERIA = {}
RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    CRITERIA[number] = title
    ok = RESULTS.get(number, True)
    if report.failed or (report.when == "call" and report.skipped):
        ok = False
    RESULTS[number] = ok


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        verdict = "PASS" if RESULTS[number] else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {CRITERIA[number]}")
