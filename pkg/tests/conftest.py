import pytest

_REPORT = []


def pytest_addoption(parser):
    parser.addoption("--run-optin", action="store_true", default=False,
                     help="run long opt-in checks (d=3 strong rate)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-optin"):
        return
    skip = pytest.mark.skip(reason="opt-in; pass --run-optin")
    for item in items:
        if "optin" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def report():
    """Record one acceptance line: ``report(number, passed, detail)``."""
    def add(number, passed, detail):
        _REPORT.append((number, "PASS" if passed else "FAIL", detail))
        return passed
    return add


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(_REPORT, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {detail}")
