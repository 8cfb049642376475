import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line and fail the test if the criterion is not met."""

    def _report(k: int, name: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {k:2d}  {name}: {detail}"
        _LINES.append((k, line))
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
