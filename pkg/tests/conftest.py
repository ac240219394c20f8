"""Shared pytest plumbing: surface acceptance gate verdicts in the summary."""

gate_lines: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if gate_lines:
        terminalreporter.section("acceptance gates")
        for line in gate_lines:
            terminalreporter.write_line(line)
