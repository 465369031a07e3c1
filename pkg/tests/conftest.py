import ac_log


def pytest_terminal_summary(terminalreporter):
    if ac_log.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ac_log.RESULTS:
            terminalreporter.write_line(line)
