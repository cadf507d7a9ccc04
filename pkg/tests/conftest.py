import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_acceptance():
    """Collects one summary line per acceptance criterion."""

    def record(number, title, passed, detail):
        ACCEPTANCE_LINES.append(
            f"[{'PASS' if passed else 'FAIL'}] AC{number:<2} {title}: {detail}"
        )
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("AC")[1].split()[0])):
        terminalreporter.write_line(line)
