"""Time-independent algebra of a finite ergodic Markov chain with velocities.

Conventions
-----------
``Q`` is the N x N intensity matrix, ``A`` the d x N velocity matrix whose
column ``i`` is the velocity ``a(i)`` in state ``i``. The deviation matrix is

    R0 = int_0^inf (exp(Qt) - Pi) dt,

so that ``Q R0 = R0 Q = Pi - I`` and ``Pi R0 = R0 Pi = 0``. With this sign
``u = -R0 g`` solves ``Q u = g`` whenever ``Pi g = 0``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from sklearn.base import BaseEstimator

from .exceptions import (
    BalanceViolationError,
    DefectiveGeneratorError,
    ModelValidationError,
    NonPositiveDiffusionError,
    SingularSystemError,
)
from .tolerances import DEFAULT_TOLERANCES
from .validation import check_generator, check_positive, check_velocity


@dataclass(frozen=True)
class ChainModel:
    """Generator ``Q`` (N x N) and velocity matrix ``A`` (d x N)."""

    Q: np.ndarray
    A: np.ndarray
    name: str = "custom"

    @property
    def N(self):
        return self.Q.shape[0]

    @property
    def d(self):
        return self.A.shape[0]

    def to_dict(self):
        return {"name": self.name, "N": self.N, "d": self.d,
                "Q": self.Q.tolist(), "A": self.A.tolist()}


@dataclass(frozen=True)
class ChainAlgebra:
    """Derived algebra of a validated chain.

    ``projectors[j]`` is the spectral projector of ``eigenvalues[j]``; the
    projector of the zero eigenvalue is replaced by the exact ``Pi``.
    """

    pi: np.ndarray
    Pi: np.ndarray
    R0: np.ndarray
    eigenvalues: np.ndarray
    projectors: np.ndarray
    zero_index: int
    a_hat: np.ndarray = None
    balance_residual: np.ndarray = None
    Q: np.ndarray = field(default=None, repr=False)

    @property
    def N(self):
        return self.Pi.shape[0]

    @property
    def decaying_modes(self):
        """(eigenvalue, projector) pairs with Re(mu) < 0."""
        keep = [j for j in range(len(self.eigenvalues)) if j != self.zero_index]
        return self.eigenvalues[keep], self.projectors[keep]

    @property
    def spectral_gap(self):
        mu, _ = self.decaying_modes
        return float(-np.max(mu.real))

    def exp0(self, t):
        return exp0(self, t)

    def resolvent(self, lam):
        return resolvent(self, lam)


def validate_model(model, tol=DEFAULT_TOLERANCES):
    """Return ``model`` with float arrays if every ChainModel invariant holds."""
    Q = check_generator(model.Q, tol)
    A = check_velocity(model.A, Q.shape[0])
    return ChainModel(Q=Q, A=A, name=model.name)


def stationary_distribution(model, tol=DEFAULT_TOLERANCES):
    """Least-squares solution of ``[Q^T; 1^T] pi = [0; 1]``."""
    Q = model.Q
    n = Q.shape[0]
    system = np.vstack([Q.T, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    residual = np.linalg.norm(system @ pi - rhs, np.inf)
    scale = max(1.0, np.linalg.norm(Q, np.inf))
    if residual > tol.stationary_residual * scale or np.any(pi <= 0):
        raise SingularSystemError(
            f"stationary system residual {residual:.3e} (min pi {pi.min():.3e})")
    return pi


def deviation_matrix(model, pi, tol=DEFAULT_TOLERANCES):
    """``R0 = (Pi - Q)^{-1} - Pi``; equals the integral of ``exp(Qt) - Pi``."""
    Pi = np.outer(np.ones(len(pi)), pi)
    fundamental = Pi - model.Q
    cond = np.linalg.cond(fundamental)
    if not np.isfinite(cond) or cond > tol.condition_max:
        raise SingularSystemError(f"Pi - Q is numerically singular (cond {cond:.3e})")
    return np.linalg.inv(fundamental) - Pi


def spectral_decomposition(Q, Pi, tol=DEFAULT_TOLERANCES):
    """Eigenvalues of ``Q`` and their rank-one spectral projectors.

    Returns ``(eigenvalues, projectors, zero_index)``. Raises
    DefectiveGeneratorError if ``sum_j exp(mu_j t) P_j`` does not reproduce
    ``exp(Qt)`` to the reconstruction tolerance.
    """
    mu, V = np.linalg.eig(Q)
    if np.linalg.cond(V) > tol.condition_max:
        raise DefectiveGeneratorError("eigenvector matrix of Q is numerically singular")
    W = np.linalg.inv(V)
    projectors = np.einsum("ij,jk->jik", V, W)
    near_zero = np.flatnonzero(np.abs(mu) < tol.zero_eigenvalue)
    if len(near_zero) != 1:
        raise ModelValidationError(
            f"expected exactly one zero eigenvalue of Q, found {len(near_zero)}")
    zero = int(near_zero[0])
    others = np.delete(mu, zero)
    if np.any(others.real >= 0):
        raise ModelValidationError("Q has a non-zero eigenvalue with Re >= 0")
    mu = mu.copy()
    mu[zero] = 0.0
    projectors[zero] = Pi
    for t in (0.0, 0.5, 1.0, 5.0):
        recon = np.einsum("j,jik->ik", np.exp(mu * t), projectors)
        err = np.abs(recon - expm(Q * t)).max()
        if err > tol.spectral_reconstruction:
            raise DefectiveGeneratorError(
                f"spectral reconstruction of exp(Qt) fails at t={t} (error {err:.3e})")
    return mu, projectors, zero


def exp0(algebra, t):
    """``exp(Qt) - Pi`` by scaling and squaring on the deflated generator.

    ``exp((Q - s Pi) t) = exp(Qt) + (exp(-st) - 1) Pi`` because ``Q`` and ``Pi``
    commute, so subtracting ``exp(-st) Pi`` leaves ``exp0`` with relative rather
    than absolute accuracy once ``exp(Qt)`` has converged to ``Pi``.
    """
    t = float(t)
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    Q = algebra.Q
    s = 2.0 * max(1.0, np.abs(np.diag(Q)).max())
    return expm((Q - s * algebra.Pi) * t) - np.exp(-s * t) * algebra.Pi


def resolvent(algebra, lam, tol=DEFAULT_TOLERANCES):
    """``(lam I - Pi + (R0 + Pi)^{-1})^{-1}``, the Laplace transform of ``exp(Qt)``.

    On vectors with ``Pi g = 0`` this is the transform of ``exp0``.
    """
    lam = check_positive(lam, "lambda")
    n = algebra.N
    inner = algebra.R0 + algebra.Pi
    if np.linalg.cond(inner) > tol.condition_max:
        raise SingularSystemError("R0 + Pi is numerically singular")
    outer = lam * np.eye(n) - algebra.Pi + np.linalg.inv(inner)
    if np.linalg.cond(outer) > tol.condition_max:
        raise SingularSystemError(f"resolvent is singular at lambda={lam}")
    return np.linalg.inv(outer)


def balance_check(model, pi):
    """Stationary mean velocity ``sum_i pi_i a(i)``; zero iff ``Pi A Pi = 0``."""
    return model.A @ pi


def diffusion_tensor(model, pi, R0, tol=DEFAULT_TOLERANCES):
    """Symmetrized ``a_hat_kl = sum_ij pi_i a_k(i) R0_ij a_l(j)``.

    This is the scalar coefficient of ``Pi (A grad) R0 (A grad) Pi``, i.e. the
    diffusion tensor of the limit heat equation.
    """
    residual = balance_check(model, pi)
    if np.abs(residual).max() > tol.balance:
        raise BalanceViolationError(residual)
    raw = (model.A * pi) @ R0 @ model.A.T
    a_hat = 0.5 * (raw + raw.T)
    eig = np.linalg.eigvalsh(a_hat)
    if eig.min() <= tol.positive_definite:
        raise NonPositiveDiffusionError(eig)
    return a_hat


def diffusion_tensor_pi_weighted(model, pi, R0):
    """Variant with an extra trailing ``pi_j`` weight: ``sum_ij pi_i a_k(i) r_ij a_l(j) pi_j``.

    Reported for comparison only; it is not used by the expansion.
    """
    raw = (model.A * pi) @ R0 @ (model.A * pi).T
    return 0.5 * (raw + raw.T)


def chain_algebra(model, tol=DEFAULT_TOLERANCES, require_balance=True):
    """Validate ``model`` and compute every derived object in one pass."""
    model = validate_model(model, tol)
    pi = stationary_distribution(model, tol)
    Pi = np.outer(np.ones(model.N), pi)
    R0 = deviation_matrix(model, pi, tol)
    mu, projectors, zero = spectral_decomposition(model.Q, Pi, tol)
    residual = balance_check(model, pi)
    a_hat = diffusion_tensor(model, pi, R0, tol) if require_balance else None
    return ChainAlgebra(pi=pi, Pi=Pi, R0=R0, eigenvalues=mu, projectors=projectors,
                        zero_index=zero, a_hat=a_hat, balance_residual=residual,
                        Q=model.Q)


class MarkovChainAlgebra(BaseEstimator):
    """Estimator front-end for :func:`chain_algebra`.

    Parameters
    ----------
    require_balance : bool
        If False, unbalanced velocity matrices are accepted and ``a_hat_`` is
        left as None.
    tol : Tolerances, optional

    Attributes
    ----------
    pi_, Pi_, R0_, eigenvalues_, projectors_, a_hat_, balance_residual_
    """

    def __init__(self, require_balance=True, tol=None):
        self.require_balance = require_balance
        self.tol = tol

    def fit(self, Q, A):
        tol = self.tol or DEFAULT_TOLERANCES
        self.model_ = validate_model(ChainModel(Q=np.asarray(Q), A=np.asarray(A)), tol)
        self.algebra_ = chain_algebra(self.model_, tol, self.require_balance)
        alg = self.algebra_
        self.pi_ = alg.pi
        self.Pi_ = alg.Pi
        self.R0_ = alg.R0
        self.eigenvalues_ = alg.eigenvalues
        self.projectors_ = alg.projectors
        self.a_hat_ = alg.a_hat
        self.balance_residual_ = alg.balance_residual
        return self

    def transform(self, t):
        """``exp0`` evaluated at each time in ``t``; shape ``(len(t), N, N)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([exp0(self.algebra_, ti) for ti in t])
