import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240803)


def make_feasible_pair(rng, m=8, n=15):
    """Full-row-rank phi and a y guaranteed to be attainable."""
    phi = rng.standard_normal((m, n))
    y = phi @ rng.standard_normal(n)
    return phi, y
