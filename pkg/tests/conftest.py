import pytest

# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def record(key: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {key}: {detail}"
    ACCEPTANCE[key] = line
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:].split()[0])):
        terminalreporter.write_line(ACCEPTANCE[key])
