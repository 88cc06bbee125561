import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(n, rng):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


# acceptance lines are collected here and echoed in the terminal summary,
# so they show up in a plain `pytest -v` run without -s
_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def report():
    def emit(criterion: int, passed: bool, detail: str, part: str = ""):
        key = f"{criterion}{part}"
        line = f"criterion {key:<3} {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[key] = line
        print(line)
        return passed
    return emit


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda s: (int("".join(c for c in s if c.isdigit())), s)):
        terminalreporter.write_line(_ACCEPTANCE[key])
