import pytest

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture()
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion; printed at the end of the run."""

    def record(k: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[k] = (bool(ok), detail)
        print(f"ACCEPTANCE {k}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"ACCEPTANCE {k}: {'PASS' if ok else 'FAIL'}  {detail}")
