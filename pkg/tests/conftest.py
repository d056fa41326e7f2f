def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance suite's per-criterion lines.

    pytest's fd-level capture swallows them during the run; the terminal
    summary is the one place guaranteed to reach the console.
    """
    try:
        import test_acceptance
    except ImportError:
        return
    lines = getattr(test_acceptance, "RESULTS", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
