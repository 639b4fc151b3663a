import pytest

_acceptance = []


@pytest.fixture
def criterion(record_property):
    """Label an acceptance test and attach the measured value to its report line."""

    def mark(label, measured=""):
        record_property("criterion", label)
        record_property("measured", measured)

    return mark


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _acceptance.append((props["criterion"], report.passed, props.get("measured", "")))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label, ok, measured in sorted(_acceptance, key=lambda r: r[0]):
        line = f"{'PASS' if ok else 'FAIL'}  {label}"
        if measured:
            line += f"  [{measured}]"
        tr.write_line(line)
