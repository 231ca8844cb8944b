import re

import numpy as np
import pytest

from goodsubset.belief import VarianceMode, init_beliefs

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda s: (int(re.match(r"\d+", s).group()), s)):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {key}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def fill_state(means, stds, n, rng, known=True):
    """State after ``n`` observations of every alternative."""
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    mode = VarianceMode.known(stds ** 2) if known else VarianceMode.plugin()
    state = init_beliefs(len(means), var_mode=mode)
    for _ in range(n):
        for i in range(len(means)):
            state.observe(i, means[i] + stds[i] * rng.standard_normal())
    return state
