import sys
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    for mod in list(sys.modules.values()):
        lines = getattr(mod, "summary_lines", None)
        if callable(lines) and getattr(mod, "ACCEPTANCE_RESULTS", None):
            terminalreporter.section("acceptance criteria")
            for line in lines():
                terminalreporter.write_line(line)
            break
