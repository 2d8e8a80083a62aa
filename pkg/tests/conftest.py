import dataclasses

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from disco_isac.config import ScenarioConfig

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def small_config():
    """Default geometry with a 16x16 surface: fast enough for unit tests."""
    return dataclasses.replace(ScenarioConfig(), n_d_h=16, n_d_v=16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def _report(n, ok, detail):
        lines.append((n, f"CRITERION {n}: {'PASS' if ok else 'FAIL'} | {detail}"))

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
