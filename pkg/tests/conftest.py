import pytest

_acceptance_lines = []


@pytest.fixture
def acceptance_report():
    """Print a criterion result line and repeat it in the terminal summary."""

    def report(line):
        print(line)
        _acceptance_lines.append(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
