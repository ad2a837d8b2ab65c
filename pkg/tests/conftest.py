import pytest

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion("C1", ok, "detail")`` then assert."""

    def record(name: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[name] = (bool(ok), detail)
        print(f"{name}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"{name} failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda n: int(n[1:])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{name:4s} {'PASS' if ok else 'FAIL'}  {detail}")
