import pytest

# Acceptance verdicts, filled in by test_acceptance.py and printed at the end of the run.
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    def report(number, name, ok, detail=""):
        line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {name}"
        if detail:
            line += f" ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
