import sys
from contextlib import contextmanager
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> list of (check name, passed)
ACCEPTANCE_RESULTS: dict[int, list[tuple[str, bool]]] = {}


@contextmanager
def criterion(number: int, name: str):
    """Record whether the enclosed checks for an acceptance criterion pass."""
    ok = False
    try:
        yield
        ok = True
    finally:
        ACCEPTANCE_RESULTS.setdefault(number, []).append((name, ok))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        checks = ACCEPTANCE_RESULTS[number]
        failed = [name for name, ok in checks if not ok]
        status = "PASS" if not failed else "FAIL"
        detail = f" ({len(checks)} checks)" if not failed else f" (failed: {', '.join(failed)})"
        terminalreporter.write_line(f"criterion {number}: {status}{detail}")
