"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""
import numpy as np
from scipy.sparse.csgraph import connected_components
from sklearn.utils.validation import check_array

from .exceptions import (
    ModelValidationError,
    NegativeIntensityError,
    ReducibleChainError,
    RowSumError,
)
from .tolerances import DEFAULT_TOLERANCES


def check_generator(Q, tol=DEFAULT_TOLERANCES):
    """Validate an intensity matrix and return it as a float array.

    Checks, in order: square shape with at least two states, non-negative
    off-diagonal entries, zero row sums and irreducibility of the jump graph.
    """
    Q = check_array(Q, dtype=np.float64, ensure_2d=True, ensure_min_samples=2,
                    ensure_min_features=2, input_name="Q")
    n = Q.shape[0]
    if Q.shape != (n, n):
        raise ModelValidationError(f"Q must be square, got shape {Q.shape}")
    off = Q - np.diag(np.diag(Q))
    neg = np.argwhere(off < 0)
    if len(neg):
        i, j = neg[0]
        raise NegativeIntensityError(int(i), int(j), float(Q[i, j]))
    sums = Q.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums) > tol.row_sum * max(1.0, np.abs(Q).max()))
    if len(bad):
        raise RowSumError(int(bad[0]), float(sums[bad[0]]))
    check_irreducible(Q)
    return Q


def check_irreducible(Q):
    """Raise ReducibleChainError unless the off-diagonal pattern is strongly connected."""
    adjacency = (Q > 0) & ~np.eye(Q.shape[0], dtype=bool)
    n_classes, labels = connected_components(adjacency, directed=True, connection="strong")
    if n_classes > 1:
        # report a state in a closed class that is not reachable from everything
        counts = np.bincount(labels)
        state = int(np.flatnonzero(labels == np.argmin(counts))[0])
        raise ReducibleChainError(int(n_classes), state)


def check_velocity(A, n_states, d=None):
    """Validate the d x N velocity matrix (column i is the velocity in state i)."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[np.newaxis, :]
    if A.ndim != 2 or A.shape[1] != n_states:
        raise ModelValidationError(
            f"velocity matrix must have shape (d, {n_states}), got {A.shape}")
    if d is not None and A.shape[0] != d:
        raise ModelValidationError(f"velocity matrix has {A.shape[0]} rows, expected d={d}")
    if not 1 <= A.shape[0] <= 3:
        raise ModelValidationError(f"spatial dimension must be 1..3, got {A.shape[0]}")
    if not np.all(np.isfinite(A)):
        raise ModelValidationError("velocity matrix contains non-finite entries")
    return A


def check_positive(value, name):
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    return value
