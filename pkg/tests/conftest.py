import pytest
from hypothesis import HealthCheck, settings

from dpsmarket import MarketParams, QueueConfig

settings.register_profile("default", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def worked():
    """Parameters of the worked interior example: gamma = 0.1, alpha = 0.8."""
    return QueueConfig(mu=1.0, lambda_d=0.01, gamma=0.1), MarketParams(c=1.0, alpha1=0.8, alpha2=0.8)


# one pass/fail line per acceptance criterion, printed after the run
_CRITERIA: dict[int, tuple[bool, str]] = {}
N_CRITERIA = 10


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str) -> None:
        _CRITERIA[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        passed, detail = _CRITERIA.get(k, (False, "did not run to completion"))
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
