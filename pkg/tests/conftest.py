import numpy as np
import pytest

from randevo.markov import ChainModel, stationary_distribution


def random_model(rng, n=None, d=None, balanced=True):
    """Random irreducible generator with a velocity matrix balanced against its pi."""
    n = n or int(rng.integers(2, 9))
    d = d or int(rng.integers(1, min(3, n - 1) + 1))
    Q = rng.uniform(0.1, 2.0, (n, n)) * (rng.random((n, n)) < 0.7)
    # a cycle keeps the chain irreducible whatever the random mask removed
    Q[np.arange(n), (np.arange(n) + 1) % n] += rng.uniform(0.2, 1.0, n)
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    A = rng.normal(size=(d, n))
    if balanced:
        pi = stationary_distribution(ChainModel(Q=Q, A=A))
        A = A - (A @ pi)[:, None]
    return ChainModel(Q=Q, A=A, name=f"random{n}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
