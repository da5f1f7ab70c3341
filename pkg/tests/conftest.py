import pytest
from hypothesis import HealthCheck, settings

from magcouple.physics import PhysicalParams, calibrate_coupling

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

# criterion lines collected by test_acceptance and echoed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def params() -> PhysicalParams:
    return calibrate_coupling(PhysicalParams())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
