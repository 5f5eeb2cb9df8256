import numpy as np
import pytest

from compriskacc.simulation import generate_dataset, scenario_setup


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def setup_70_medium():
    return scenario_setup(0.70, "medium", "independent")


@pytest.fixture(scope="session")
def simulated(setup_70_medium):
    """A censored 70%/medium dataset of 300 subjects and its horizon."""
    s = setup_70_medium
    sample, latent = generate_dataset(s.fine_gray, s.censoring, 300, 2024, s.tau)
    return sample, s.tau


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance(capsys):
    """Record and immediately print one pass/fail line for a criterion."""

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
