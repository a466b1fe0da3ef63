import numpy as np
import pytest
from hypothesis import settings

# first calls pay numba compilation, so wall-clock deadlines are meaningless
settings.register_profile("fockconc", deadline=None, max_examples=60)
settings.load_profile("fockconc")

_ACCEPTANCE = []


@pytest.fixture
def record():
    """Collect one acceptance line per criterion; printed in the terminal summary."""

    def _rec(number: int, title: str, passed: bool, detail: str):
        _ACCEPTANCE.append((number, title, passed, detail))
        return passed

    return _rec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE):
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] #{number:>2} {title}: {detail}")
