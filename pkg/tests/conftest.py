import pytest

# filled by tests/test_acceptance.py, one (criterion, passed, detail) per check
ACCEPTANCE_RESULTS: list[tuple[int, bool, str]] = []


@pytest.fixture
def verdict():
    def record(criterion: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion:2d}: {detail}"
        ACCEPTANCE_RESULTS.append((criterion, ok, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)
