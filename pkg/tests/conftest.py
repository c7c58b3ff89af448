import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from altgda.game import noninterior_3x3, rock_paper_scissors, solve_equilibrium_max_support

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def rps():
    return rock_paper_scissors()


@pytest.fixture(scope="session")
def rps_profile(rps):
    return solve_equilibrium_max_support(rps)


@pytest.fixture(scope="session")
def game3():
    return noninterior_3x3()


@pytest.fixture(scope="session")
def game3_profile(game3):
    return solve_equilibrium_max_support(game3)


def random_simplex(rng, d, size=None):
    e = rng.exponential(size=(d,) if size is None else (size, d))
    return e / e.sum(axis=-1, keepdims=True)


ACCEPTANCE_LINES = []


def acceptance_report(number, ok, detail):
    """Record one PASS/FAIL line for an acceptance criterion and echo it."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
