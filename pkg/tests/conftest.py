import pytest

_LINES = []


@pytest.fixture
def criterion():
    """Record a one-line verdict for an acceptance criterion, then assert it."""
    def _record(num: int, ok: bool, desc: str, detail: str = ""):
        line = f"criterion {num:02d} {'PASS' if ok else 'FAIL'}  {desc}"
        _LINES.append(line)
        print(line)
        assert ok, f"criterion {num:02d} failed: {desc}" + \
            (f" [{detail}]" if detail else "")
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
