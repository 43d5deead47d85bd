ACCEPTANCE = []


def record(num, title, ok, detail=""):
    """Store one acceptance verdict; printed in the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'}  criterion {num}: {title}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
