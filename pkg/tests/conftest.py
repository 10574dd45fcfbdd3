import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict(request):
    """``verdict(label, ok, detail)`` records one PASS/FAIL line, prints it, then asserts."""

    def record(label: str, ok: bool, detail: str):
        line = f"{label} {'PASS' if ok else 'FAIL'}: {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
