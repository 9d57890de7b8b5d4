import pytest

_ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, ok, detail)``; a summary line per criterion is printed at the end of the run."""

    def record(number: int, title: str, ok: bool, detail: str):
        prev = _ACCEPTANCE.get(number)
        ok = ok and (prev is None or prev[1])
        detail = detail if prev is None else f"{prev[2]}; {detail}"
        _ACCEPTANCE[number] = (title, ok, detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{number}] {title}: {detail}")
