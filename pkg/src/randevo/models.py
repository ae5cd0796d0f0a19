"""Built-in chain models: the telegraph process and direction switching on a simplex."""
import re

import numpy as np

from .exceptions import BalanceViolationError, UnknownModelError
from .markov import ChainModel, balance_check, stationary_distribution, validate_model
from .tolerances import DEFAULT_TOLERANCES


def simplex_directions(n):
    """The ``n + 1`` unit vertices of a regular simplex in ``R^n`` centred at 0.

    Columns of the returned ``(n, n + 1)`` array sum to zero.
    """
    centred = np.eye(n + 1) - 1.0 / (n + 1)
    # orthonormal basis of the hyperplane orthogonal to (1, ..., 1)
    basis, _ = np.linalg.qr(centred[:, :n])
    coords = basis.T @ centred
    return coords / np.linalg.norm(coords, axis=0)


def two_state_telegraph():
    return ChainModel(Q=np.array([[-1.0, 1.0], [1.0, -1.0]]),
                      A=np.array([[1.0, -1.0]]), name="two_state_telegraph")


def cyclic(n, directions=None):
    """``n + 1`` states, unit rate, jumps ``i -> i + 1 (mod n + 1)``."""
    size = n + 1
    Q = -np.eye(size)
    Q[np.arange(size), (np.arange(size) + 1) % size] = 1.0
    return _with_directions(Q, n, directions, f"cyclic({n})")


def uniform(n, directions=None):
    """``n + 1`` states, unit total rate, jumps to each other state with rate ``1/n``."""
    size = n + 1
    Q = np.full((size, size), 1.0 / n)
    np.fill_diagonal(Q, -1.0)
    return _with_directions(Q, n, directions, f"uniform({n})")


def _with_directions(Q, n, directions, name):
    if not 1 <= n <= 3:
        raise ValueError(f"n must be 1..3 so that d = n fits the grid, got {n}")
    A = simplex_directions(n) if directions is None else np.asarray(directions, dtype=float)
    model = validate_model(ChainModel(Q=Q, A=A, name=name))
    residual = balance_check(model, stationary_distribution(model))
    if np.abs(residual).max() > DEFAULT_TOLERANCES.balance:
        raise BalanceViolationError(residual)
    return model


BUILTINS = {
    "two_state_telegraph": "canonical telegraph: Q=[[-1,1],[1,-1]], a=(+1,-1), d=1",
    "cyclic(n)": "n+1 directions switched cyclically, q_ii=-1, q_i,i+1=1, simplex in d=n",
    "uniform(n)": "n+1 directions switched uniformly, q_ii=-1, q_ij=1/n, simplex in d=n",
}


def builtin_model(name, directions=None, **params):
    """Resolve ``two_state_telegraph``, ``cyclic(n)`` or ``uniform(n)``.

    ``n`` may be given inside the name or as a keyword.
    """
    match = re.fullmatch(r"\s*(\w+)\s*(?:\(\s*(\d+)\s*\))?\s*", name)
    if not match:
        raise UnknownModelError(name)
    base, arg = match.group(1), match.group(2)
    if base == "two_state_telegraph":
        return two_state_telegraph()
    if base in ("cyclic", "uniform"):
        n = int(arg if arg is not None else params.get("n", 2))
        return (cyclic if base == "cyclic" else uniform)(n, directions)
    raise UnknownModelError(name)
