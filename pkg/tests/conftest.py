from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bilinsphere.documents import parse_system
from bilinsphere.geometry import build_cell_complex

FIXTURES = Path(__file__).parent / "fixtures"

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.json"


def load_fixture(name: str):
    """``(system, subsystem, cell complex)`` for a frozen fixture document."""
    system, sub = parse_system(fixture_path(name).read_text())
    return system, sub, build_cell_complex(sub)


@pytest.fixture(scope="session")
def theorem_a():
    return load_fixture("theorem_a")


@pytest.fixture(scope="session")
def theorem_b():
    return load_fixture("theorem_b")


@pytest.fixture(scope="session")
def theorem_c():
    return load_fixture("theorem_c")


@pytest.fixture(scope="session")
def verdict_a(theorem_a):
    from bilinsphere.reachability import decide

    return decide(theorem_a[1], theorem_a[2])


@pytest.fixture(scope="session")
def verdict_b(theorem_b):
    from bilinsphere.reachability import decide

    return decide(theorem_b[1], theorem_b[2])


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


ACCEPTANCE_LINES = []


def report_criterion(number: int, passed: bool, summary: str, seconds: float):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {summary}  ({seconds:.1f} s)"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
