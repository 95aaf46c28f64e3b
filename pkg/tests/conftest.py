import pytest

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion a test gates")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    name = marker.args[0]
    detail = dict(item.user_properties).get("detail", "")
    if report.when == "call" or report.failed:
        prev = _criteria.get(name, (True, ""))
        _criteria[name] = (prev[0] and report.passed, "; ".join(d for d in (prev[1], detail) if d))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda n: int(n.split()[0][1:])):
        passed, detail = _criteria[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def tmp_csv(tmp_path):
    return tmp_path / "trace.csv"
