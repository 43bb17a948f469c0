from pathlib import Path

import numpy as np
import pytest

from riskparity import randcorr
from riskparity.oracle import cov_from_sigma_rho, load_fixtures

FIXTURES = Path(__file__).parent / "fixtures"

GOLDEN_SIGMA = (0.1, 0.2, 0.3)
GOLDEN_RHO = (0.8, 0.2, 0.4)

_acceptance_lines = []


def random_cov(n, seed, test_id=1):
    """Test-``test_id`` correlation scaled by random vols in [0.05, 0.5]."""
    corr = randcorr.trial_matrix(test_id, n, seed).entries
    vols = randcorr.make_rng(randcorr.derive_seed(seed, 99)).uniform(0.05, 0.5, n)
    return corr * np.outer(vols, vols), vols


@pytest.fixture(scope="session")
def golden_cases():
    return load_fixtures(FIXTURES / "golden.txt")


@pytest.fixture(scope="session")
def golden(golden_cases):
    case = next(c for c in golden_cases if np.allclose(c["sigma"], GOLDEN_SIGMA) and np.allclose(c["rho"], GOLDEN_RHO))
    return {"cov": cov_from_sigma_rho(GOLDEN_SIGMA, GOLDEN_RHO), **case}


@pytest.fixture(scope="session")
def acceptance_log():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
