"""Shared pytest plumbing for the acceptance gate.

The `verdict` fixture records one PASS/FAIL line per end-to-end guarantee;
the terminal-summary hook replays them after the run so the checklist is
visible even when output capture hides prints from passing tests.
"""
import pytest

_verdict_lines: list[str] = []


@pytest.fixture(scope="session")
def verdict():
    def record(label: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        _verdict_lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _verdict_lines:
        terminalreporter.section("acceptance verdicts")
        for line in _verdict_lines:
            terminalreporter.write_line(line)
