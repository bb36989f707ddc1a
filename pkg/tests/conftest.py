"""Shared fixtures and the end-of-run acceptance summary hook."""

import numpy as np
import pytest

from plpmlg.gibbs import ModelData, scale_weights
from plpmlg.population import Population

# acceptance criterion results, filled by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_mixed_count_data(n=200, r=5, p=3, seed=42):
    """Mixed zero/nonzero counts with unequal weights.

    30% of the counts are structural zeros and the rest sit far from the
    boundary, so the boundary-corrected chain is exercised with a clear
    zero/nonzero split; two small continuous covariates and uniform area
    codes complete the design.
    """
    rng = np.random.default_rng(seed)
    n_zero = int(round(0.3 * n))
    z = np.concatenate([np.zeros(n_zero, dtype=np.int64),
                        rng.poisson(170.0, size=n - n_zero)])
    z = rng.permutation(z)
    x = 0.05 * rng.standard_normal((n, p - 1))
    codes = rng.integers(0, r, size=n)
    w_raw = rng.uniform(0.9, 1.1, size=n)
    psi = np.zeros((n, r))
    psi[np.arange(n), codes] = 1.0
    return ModelData(Z=z, X=np.column_stack([np.ones(n), x]), Psi=psi,
                     w_tilde=scale_weights(w_raw))


@pytest.fixture(scope="session")
def mixed_count_data():
    data = make_mixed_count_data()
    assert (data.Z == 0).mean() == 0.3
    return data


@pytest.fixture()
def tiny_population():
    """Eight units, three areas, one numeric covariate."""
    return Population(
        unit_id=np.arange(8),
        area_id=np.array([0, 0, 0, 1, 1, 1, 2, 2]),
        z=np.array([0, 3, 1, 0, 0, 5, 2, 0]),
        size_measure=np.array([1.0, 2.0, 1.5, 1.0, 0.5, 3.0, 2.0, 1.0]),
        covariates={"x": np.array([0.1, -0.2, 0.0, 0.3, -0.1, 0.2, 0.0, 0.1])},
    )
