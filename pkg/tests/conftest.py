"""Shared random-instance generators for the test suite."""

import numpy as np
import pytest

DENOM = 10**9


def random_simplex(rng, n):
    """A generic probability vector with strictly positive entries."""
    w = rng.exponential(size=n) + 1e-3
    return w / w.sum()


def rational_simplex(rng, n):
    """A probability vector whose entries are exact multiples of 1e-9.

    Such weights survive the solvers' integer scaling without any
    perturbation, so LP optima can be compared to oracles at tight
    tolerances.
    """
    counts = rng.multinomial(DENOM, random_simplex(rng, n))
    if np.any(counts == 0):
        counts = counts + 1
        counts[np.argmax(counts)] -= n
    return counts / DENOM


def random_points(rng, n, d, spread=1.0):
    return spread * rng.standard_normal((n, d))


def random_spd(rng, d, scale=1.0):
    """A well-conditioned random symmetric positive definite matrix."""
    A = rng.standard_normal((d, d))
    return scale * (A @ A.T + d * np.eye(d))


@pytest.fixture
def rng():
    return np.random.default_rng(42)
