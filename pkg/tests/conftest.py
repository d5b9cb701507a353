import criteria


def pytest_terminal_summary(terminalreporter):
    if not criteria.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(criteria.RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
