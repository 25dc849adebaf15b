def pytest_terminal_summary(terminalreporter):
    from _acceptance_report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
