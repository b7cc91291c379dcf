from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from oodhawkes.events import EventSequence, Taxonomy

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def fixture_seq() -> EventSequence:
    """Cause (0) at 2.0 and intervention (2) at 2.5 on T = 10."""
    return EventSequence("fx", 10.0, np.array([2.0, 2.5]), np.array([0, 2]))


@pytest.fixture
def fixture_taxonomy() -> Taxonomy:
    return Taxonomy.build(1, 1, 1)
