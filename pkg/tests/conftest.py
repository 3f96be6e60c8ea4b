"""Shared fixtures and the acceptance-criteria summary printer."""

import re

import pytest

_CRITERION = re.compile(r"test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one pass/fail line per acceptance criterion."""
    seen = {}
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call":
                continue
            match = _CRITERION.search(rep.nodeid)
            if match is None:
                continue
            num = int(match.group(1))
            label = rep.nodeid.split("::")[-1]
            seen[num] = (outcome == "passed" and seen.get(num, (True,))[0],
                         label)
    if not seen:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for num in sorted(seen):
        ok, label = seen[num]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"  criterion {num:>2}: {status}  {label}")
