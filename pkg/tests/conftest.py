import pytest

_RESULTS = {}


@pytest.fixture
def criterion(request, capsys):
    """Record and print the verdict of one acceptance criterion."""

    def report(number, ok, detail=""):
        _RESULTS[number] = (bool(ok), detail)
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        ok, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
