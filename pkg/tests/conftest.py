import os
from pathlib import Path

import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_record():
    """Collects one verdict line per acceptance criterion for the summary."""
    def record(number: int, title: str, passed: bool | None, detail: str):
        status = {True: "PASS", False: "FAIL", None: "NOT RUN"}[passed]
        line = f"[{number:>2}] {status:7s} {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def atp_data_dir():
    """Directory with the public ATP match files, if the user provides one."""
    path = os.environ.get("TENNIS_DQR_DATA")
    if not path or not Path(path).is_dir():
        pytest.skip("real ATP corpus not available (set TENNIS_DQR_DATA to the match CSV directory)")
    return Path(path)
