import warnings
from functools import lru_cache

import pytest
from hypothesis import settings

from sbpexist.construct import closure_for
from sbpexist.existence import SbpParameters

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# minimal closure size for t = s, s = 1..8
MIN_R = {1: 1, 2: 4, 3: 6, 4: 8, 5: 11, 6: 14, 7: 19, 8: 23}


@lru_cache(maxsize=None)
def cached_closure(s: int, t: int, r: int):
    return closure_for(SbpParameters(s, t, r))


@pytest.fixture
def closure():
    return cached_closure


@pytest.fixture(autouse=True)
def _quiet_solver_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", category=UserWarning, module="cvxpy")
        yield


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[str, str] = {}


def record_criterion(key: str, ok: bool, detail: str) -> None:
    line = f"criterion {key}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")

    def order(key):
        head = key.split()[0]
        return (int(head) if head.isdigit() else 99, key)

    for key in sorted(ACCEPTANCE_LINES, key=order):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
