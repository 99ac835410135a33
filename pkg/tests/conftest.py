import pytest

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for the acceptance summary.

    Call the returned function with a detail string after the assertions;
    a test that fails before calling it is recorded as FAIL.
    """
    name = request.node.name
    state = {"detail": ""}

    def done(detail: str) -> None:
        state["detail"] = detail
        state["ok"] = True

    yield done
    _ACCEPTANCE.append((name, state.get("ok", False), state["detail"]))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
