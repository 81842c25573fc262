import suites


def pytest_terminal_summary(terminalreporter):
    if not suites.ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(suites.ACCEPTANCE_LINES):
        terminalreporter.write_line(suites.ACCEPTANCE_LINES[n])
