"""Shared pytest wiring.

Tests marked ``acceptance(n)`` roll up into a per-criterion verdict that is
printed at the end of the run, one line per criterion, so a reviewer can see
at a glance which guarantees hold without reading individual test names.
"""
import pytest

ACCEPTANCE_MARK = "acceptance"


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(n): test backs numbered acceptance criterion n",
    )


def pytest_collection_modifyitems(config, items):
    mapping = {}
    for item in items:
        mark = item.get_closest_marker(ACCEPTANCE_MARK)
        if mark is not None:
            mapping[item.nodeid] = int(mark.args[0])
    config._acceptance_map = mapping


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mapping = getattr(config, "_acceptance_map", {})
    if not mapping:
        return
    verdict: dict[int, bool] = {}
    for key in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(key, []):
            criterion = mapping.get(getattr(report, "nodeid", ""))
            if criterion is None:
                continue
            ok = key == "passed"
            verdict[criterion] = verdict.get(criterion, True) and ok
    if not verdict:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(verdict):
        status = "PASS" if verdict[criterion] else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {criterion}: {status}")
