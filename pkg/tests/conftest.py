import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record one result line for an acceptance criterion.

    Call ``criterion(number, title, ok, detail)``; the line is echoed when the
    test runs and repeated in the terminal summary.
    """
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
        _RESULTS[number] = line
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        terminalreporter.write_line(_RESULTS[number])
