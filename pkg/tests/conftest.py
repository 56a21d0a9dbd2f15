import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tensorcond import Params
from tensorcond.lab import gen_random_factors

import expected

settings.register_profile(
    "suite", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def sec91():
    return Params.from_factors([expected.SEC91_A, expected.SEC91_B, expected.SEC91_C])


@pytest.fixture
def sec92():
    return Params.from_factors(expected.SEC92_F)


def random_params(dims, r, seed):
    return Params.from_factors(gen_random_factors(dims, r, seed))


def rel(a, b):
    return abs(a - b) / abs(b)


# acceptance criteria report: one line per criterion in the terminal summary

def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): numbered acceptance criterion")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        n, text = mark.args
        item.config._criteria[n] = (rep.passed, text)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, text = results[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {text}")
