import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# criterion id -> PASS/FAIL lines, echoed at the end of the session
CRITERION_LINES: dict[str, list[str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERION_LINES):
        for line in CRITERION_LINES[key]:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion_log():
    return CRITERION_LINES
