import numpy as np
import pytest

from lowres_mimo.model import sample_rayleigh, to_real_channel


def random_real_channel(nr, k, seed):
    rng = np.random.default_rng(seed)
    return to_real_channel(sample_rayleigh(nr, k, rng))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'} [{criterion}] {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("[C")[1].split("]")[0])):
            terminalreporter.write_line(line)
