import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def criterion_report(request):
    """Collects one pass/fail line per acceptance criterion for the summary."""
    return request.config.stash.setdefault(_LINES, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
