import pytest

_GATE: list[tuple[str, bool, str]] = []


@pytest.fixture
def gate():
    """Record one acceptance line: ``gate(name, ok, detail)``."""

    def record(name: str, ok: bool, detail: str) -> bool:
        _GATE.append((name, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _GATE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _GATE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
