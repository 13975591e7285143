import pytest

ACCEPTANCE_LINES = {}


def record(num: int, ok: bool, text: str):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {text}"
    ACCEPTANCE_LINES[num] = line
    print(line)
    return ok


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
