from pathlib import Path

import pytest

HERE = Path(__file__).parent
GOLDEN = HERE / "golden"
CORRUPT = HERE / "corrupt"


@pytest.fixture
def golden_dir():
    return GOLDEN


@pytest.fixture
def corrupt_dir():
    return CORRUPT


# filled by test_acceptance.py, one (number, verdict, text) per criterion
ACCEPTANCE: list[tuple[int, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, verdict, text in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{verdict} {text}")
