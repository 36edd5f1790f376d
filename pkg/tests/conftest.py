"""Collects acceptance criterion lines and prints them after the run."""

CRITERIA: list[str] = []


def record(suite: str, name: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} [{suite}] {name}: {detail}"
    CRITERIA.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
