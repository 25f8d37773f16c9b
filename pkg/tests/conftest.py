"""Collects one pass/fail line per acceptance criterion and prints them at the end."""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("]")[0].lstrip("["))):
        terminalreporter.write_line(line)
