"""Collects acceptance-criterion outcomes and prints one verdict line per criterion."""

import pytest

_verdicts: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, title = marker.args
        entry = _verdicts.setdefault(number, {"title": title, "passed": True, "notes": []})
        entry["passed"] &= report.passed
        entry["notes"].extend(f"{k}={v}" for k, v in report.user_properties)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        v = _verdicts[number]
        status = "PASS" if v["passed"] else "FAIL"
        notes = f"  [{', '.join(v['notes'])}]" if v["notes"] else ""
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {v['title']}{notes}")
