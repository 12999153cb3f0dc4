import re


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion at the end of a run."""
    rows: dict[int, str] = {}
    for outcome, label in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = str(getattr(rep, "nodeid", ""))
            if "test_acceptance" not in nodeid:
                continue
            m = re.search(r"criterion_(\d+)", nodeid)
            if not m:
                continue
            num = int(m.group(1))
            if rows.get(num) != "FAIL":
                rows[num] = label
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for num in sorted(rows):
            terminalreporter.write_line(f"criterion {num:2d}: {rows[num]}")
