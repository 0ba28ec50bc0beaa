import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "qlab",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "qlab"))

_CRITERIA = {}


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, title, ok, detail=""):
        line = f"CRITERION {number:>2} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        _CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])
    passed = sum(" PASS " in line for line in _CRITERIA.values())
    terminalreporter.write_line(f"{passed}/{len(_CRITERIA)} criteria pass")
