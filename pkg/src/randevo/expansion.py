"""Regular and boundary-layer terms of the diffusion-scaled backward equation.

Per Fourier mode ``k`` the equation is ``du/dt = (Q/eps**2 + G_k/eps) u`` with
``G_k = diag(i a(i).k)`` and ``u(0) = fhat(k) 1``. The expansion

    u = u0(t) + sum_n eps**n (u_n(t) + v_n(t / eps**2))

is built order by order:

* regular terms solve ``Q u_n = Phi_n`` with ``Phi_1 = -G u0`` and
  ``Phi_n = du_{n-2}/dt - G u_{n-1}``, giving ``u_n = -R0 Phi_n + c_n(t)``;
* the null-space part ``c_n`` obeys the solvability condition of
  ``Phi_{n+2}``: ``dc_n/dt = Pi L0 Pi c_n - Pi G R0 (du_{n-1}/dt + G R0 Phi_n)``,
  whose homogeneous part is the heat symbol ``-lambda_k``;
* layer terms solve ``dv_n/dtau = Q v_n + G v_{n-1}``, decay as ``tau -> inf``
  and match ``v_n(0) = -u_n(0)``. Decay fixes ``c_n(0) = Pi G int_0^inf v_{n-1}``.
"""
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import (
    BalanceViolationError,
    MissingInitialConditionError,
    NonPositiveDiffusionError,
)
from .markov import ChainModel, chain_algebra
from .spectral import EPFunction, ModeGrid, StateField, TestFunction, gradient_symbols
from .tolerances import DEFAULT_TOLERANCES

MAX_ORDER = 8


class OperatorBundle:
    """Per-mode matrices of every operator in the hierarchy."""

    def __init__(self, model, algebra, grid):
        if algebra.a_hat is None:
            raise BalanceViolationError(algebra.balance_residual)
        self.model = model
        self.algebra = algebra
        self.grid = grid
        self.G = gradient_symbols(model.A, grid.modes)  # (K, N) diagonal
        R0 = algebra.R0
        self.R0G = R0[None, :, :] * self.G[:, None, :]
        self.GR0 = self.G[:, :, None] * R0[None, :, :]
        self.L0 = self.G[:, :, None] * self.R0G
        modes = grid.modes.astype(float)
        self.heat = np.einsum("kd,de,ke->k", modes, algebra.a_hat, modes)

    @property
    def n_modes(self):
        return self.G.shape[0]

    def lhat(self, n):
        """Scalar of ``Pi L_n Pi`` on the constant vector, ``L_n = (-1)**(n+1) (G R0)**n (d/dt - L0)``.

        Acting on ``c0 = exp(-lambda t) 1`` the time derivative is ``-lambda``.
        """
        ones = np.ones(self.algebra.N, dtype=complex)
        vec = -self.heat[:, None] * ones[None, :] - np.einsum("kij,j->ki", self.L0, ones)
        for _ in range(n):
            vec = np.einsum("kij,kj->ki", self.GR0, vec)
        return (-1) ** (n + 1) * vec @ self.algebra.pi

    def null_space_rate(self):
        """``pi . (G R0 G 1)`` per mode; equals ``-lambda_k`` for a balanced chain."""
        ones = np.ones(self.algebra.N)
        return np.einsum("kij,j->ki", self.L0, ones) @ self.algebra.pi


@dataclass
class ExpansionSet:
    """Terms of the expansion up to ``order``.

    ``u_terms[n]`` and ``c_terms[n]`` are functions of slow time ``t``;
    ``v_terms[n]`` (``n >= 1``) are functions of fast time ``tau = t / eps**2``.
    ``c_initial[n]`` and ``tails[n] = int_0^inf v_n`` are per-mode vectors.
    """

    ops: OperatorBundle
    f: TestFunction
    order: int
    u_terms: list = field(default_factory=list)
    v_terms: list = field(default_factory=list)
    c_terms: list = field(default_factory=list)
    phi_terms: list = field(default_factory=list)
    c_initial: dict = field(default_factory=dict)
    tails: dict = field(default_factory=dict)

    @property
    def algebra(self):
        return self.ops.algebra

    @property
    def a_hat(self):
        return self.ops.algebra.a_hat

    @property
    def grid(self):
        return self.ops.grid

    @property
    def tol(self):
        return self.u_terms[0].tol


def compute_u0(f, a_hat, grid, n_states, tol=DEFAULT_TOLERANCES):
    """Heat-equation term: ``u0(k, t) = exp(-k.a_hat.k t) fhat(k) 1``."""
    eig = np.linalg.eigvalsh(a_hat)
    if eig.min() <= tol.positive_definite:
        raise NonPositiveDiffusionError(eig)
    modes = grid.modes.astype(float)
    heat = np.einsum("kd,de,ke->k", modes, a_hat, modes)
    vectors = f.coefficients[:, None] * np.ones(n_states)[None, :]
    return EPFunction.exponential(-heat, vectors, tol=tol)


def new_expansion(model, algebra, f, order=4, tol=DEFAULT_TOLERANCES):
    """ExpansionSet holding only ``u0`` and ``c0``."""
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}, got {order}")
    ops = OperatorBundle(model, algebra, f.grid)
    u0 = compute_u0(f, algebra.a_hat, f.grid, model.N, tol)
    K, N = ops.n_modes, model.N
    es = ExpansionSet(ops=ops, f=f, order=order)
    es.u_terms.append(u0)
    es.c_terms.append(u0)
    es.v_terms.append(EPFunction.zeros(K, N, tol))
    es.phi_terms.append(EPFunction.zeros(K, N, tol))
    es.c_initial[0] = u0.evaluate(0.0)
    es.tails[0] = np.zeros((K, N), dtype=complex)
    return es


def _phi(es, n):
    """Right-hand side of ``Q u_n = Phi_n`` from lower-order regular terms."""
    G = es.ops.G
    if n == 1:
        return -es.u_terms[0].apply_diagonal(G)
    return es.u_terms[n - 2].derivative() - es.u_terms[n - 1].apply_diagonal(G)


def _phi_at_zero(es, n):
    G = es.ops.G
    if n == 1:
        return -G * es.u_terms[0].evaluate(0.0)
    return es.u_terms[n - 2].derivative().evaluate(0.0) - G * es.u_terms[n - 1].evaluate(0.0)


def compute_regular_term(es, n, c_init=None):
    """Build ``u_n`` given ``u_0..u_{n-1}`` and the null-space initial value ``c_n(0)``.

    ``c_init`` defaults to ``es.c_initial[n]``; supplying it explicitly runs the
    regular pipeline without any boundary-layer data.
    """
    if len(es.u_terms) < n:
        raise MissingInitialConditionError(f"u_{n - 1} is needed before u_{n}")
    if c_init is None:
        if n not in es.c_initial:
            raise MissingInitialConditionError(f"c_{n}(0) has not been computed")
        c_init = es.c_initial[n]
    alg, ops = es.algebra, es.ops
    phi = _phi(es, n)
    particular = phi.apply(-alg.R0)
    drift = es.u_terms[n - 1].derivative() - particular.apply_diagonal(ops.G)
    forcing = drift.apply(ops.GR0).apply(-alg.Pi)
    c_init = np.asarray(c_init, dtype=complex) @ alg.Pi.T
    c_n = EPFunction.exponential(-ops.heat, c_init, tol=es.tol) + forcing.convolve_scalar(-ops.heat)
    u_n = particular + c_n
    es.phi_terms[n:] = [phi]
    es.c_terms[n:] = [c_n]
    es.u_terms[n:] = [u_n]
    es.c_initial[n] = c_init
    return u_n


def initial_conditions(es, n):
    """``(c_n(0), v_n(0))`` from the tail of ``v_{n-1}`` and the lower regular terms."""
    if n < 1:
        raise ValueError("initial conditions are defined for n >= 1")
    if len(es.v_terms) < n or len(es.u_terms) < n:
        raise MissingInitialConditionError(f"terms of order {n - 1} are needed first")
    alg, ops = es.algebra, es.ops
    tail = es.v_terms[n - 1].tail_integral()
    es.tails[n - 1] = tail
    c0 = (ops.G * tail) @ alg.Pi.T
    particular0 = -_phi_at_zero(es, n) @ alg.R0.T
    return c0, -(particular0 + c0)


def _layer_homogeneous(es, v_init):
    """``exp0(Q tau) v_init`` as an EPFunction."""
    mu, projectors = es.algebra.decaying_modes
    K = es.ops.n_modes
    powers = np.zeros(len(mu), dtype=int)
    rates = np.broadcast_to(mu[None, :], (K, len(mu)))
    coefs = np.einsum("jab,kb->kja", projectors, v_init)
    return EPFunction(powers, rates, coefs, es.tol).merged()


def compute_singular_term(es, n):
    """Build the decaying layer term ``v_n`` with ``v_n(0) = -u_n(0)``."""
    if len(es.u_terms) <= n:
        raise MissingInitialConditionError(f"u_{n} is needed before v_{n}")
    alg, ops = es.algebra, es.ops
    v_init = -es.u_terms[n].evaluate(0.0)
    v_n = _layer_homogeneous(es, v_init)
    if n >= 2:
        source = es.v_terms[n - 1].apply_diagonal(ops.G)
        v_n = v_n + source.convolve_exp0(alg) - source.tail_from().apply(alg.Pi)
    v_n.check_decaying()
    es.v_terms[n:] = [v_n]
    return v_n


def build_expansion(model, f, order=4, algebra=None, tol=DEFAULT_TOLERANCES):
    """All terms through ``order`` for ``model`` and test function ``f``."""
    if algebra is None:
        algebra = chain_algebra(model, tol)
    es = new_expansion(model, algebra, f, order, tol)
    for n in range(1, order + 1):
        c0, _ = initial_conditions(es, n)
        es.c_initial[n] = c0
        compute_regular_term(es, n)
        compute_singular_term(es, n)
    es.tails[order] = es.v_terms[order].tail_integral() if order else es.tails[0]
    return es


# -- Laplace-domain route ----------------------------------------------------

def _layer_initial_range(es, k):
    """``(I - Pi) v_k(0) = R0 Phi_k(0)``, from regular data only."""
    return _phi_at_zero(es, k) @ es.algebra.R0.T


def laplace_moment(es, n, j, _memo=None):
    """Taylor coefficient ``a_{n,j}`` of ``int_0^inf exp(-lam tau) v_n dtau`` at ``lam = 0``.

    Uses ``Laplace[exp0] = sum_i (-lam)**i R0**(i+1)`` on the range of ``Q``, so it
    needs only the regular terms' initial data; ``a_{n,0} = int_0^inf v_n``.
    """
    memo = {} if _memo is None else _memo
    key = (n, j)
    if key in memo:
        return memo[key]
    alg, G = es.algebra, es.ops.G
    R0 = alg.R0
    powers = [np.linalg.matrix_power(R0, i + 1) for i in range(j + 1)]
    out = (-1) ** j * _layer_initial_range(es, n) @ powers[j].T
    if n >= 2:
        for i in range(j + 1):
            out = out + (-1) ** i * (G * laplace_moment(es, n - 1, j - i, memo)) @ powers[i].T
        out = out + (G * laplace_moment(es, n - 1, j + 1, memo)) @ alg.Pi.T
    memo[key] = out
    return out


def laplace_singular(es, n, lam):
    """Laplace transform of ``v_n`` per mode via the resolvent recursion.

    ``v~_n(lam) = Gamma(lam) (I-Pi) v_n(0) + Gamma(lam) (I-Pi) G v~_{n-1}(lam)
    + Pi G [v~_{n-1}(lam) - v~_{n-1}(0)] / lam`` where ``Gamma`` is the
    resolvent; ``lam = 0`` returns the Taylor value ``int_0^inf v_n``.
    """
    if lam == 0:
        return laplace_moment(es, n, 0)
    alg, G = es.algebra, es.ops.G
    gamma = alg.resolvent(lam)
    proj = np.eye(alg.N) - alg.Pi
    memo = {}
    prev = None
    for k in range(1, n + 1):
        cur = _layer_initial_range(es, k) @ gamma.T
        if k >= 2:
            src = G * prev
            cur = cur + src @ (gamma @ proj).T
            cur = cur + (src - G * laplace_moment(es, k - 1, 0, memo)) @ alg.Pi.T / lam
        prev = cur
    return prev


def regular_expansion(model, f, order=4, algebra=None, tol=DEFAULT_TOLERANCES):
    """Regular terms only; ``c_n(0)`` comes from the Laplace moments, never from ``v_n``."""
    if algebra is None:
        algebra = chain_algebra(model, tol)
    es = new_expansion(model, algebra, f, order, tol)
    memo = {}
    for n in range(1, order + 1):
        tail = laplace_moment(es, n - 1, 0, memo) if n >= 2 else np.zeros_like(es.tails[0])
        compute_regular_term(es, n, c_init=(es.ops.G * tail) @ algebra.Pi.T)
    return es


# -- evaluation and checks ----------------------------------------------------

def truncated_solution(es, N, epsilon, t):
    """``u0(t) + sum_{n<=N} eps**n (u_n(t) + v_n(t / eps**2))`` as a StateField."""
    if N > es.order:
        raise MissingInitialConditionError(f"expansion holds terms through {es.order}, not {N}")
    epsilon = float(epsilon)
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    tau = t / epsilon ** 2
    total = es.u_terms[0].evaluate(t)
    for n in range(1, N + 1):
        total = total + epsilon ** n * (es.u_terms[n].evaluate(t) + es.v_terms[n].evaluate(tau))
    return StateField(es.grid, total, float(t))


def hierarchy_residuals(es, times=(0.0, 0.5, 1.0)):
    """Max per-mode residual of the regular system at each order.

    Entry ``n`` is ``||Q u_n - Phi_n||`` (``Phi_0 = 0``, ``Phi_1 = -G u0``) and
    ``solvability[n]`` is ``||Pi Q u_n||``.
    """
    Q = es.algebra.Q
    out, solv = [], []
    for n in range(es.order + 1):
        worst, worst_s = 0.0, 0.0
        for t in times:
            qu = es.u_terms[n].evaluate(t) @ Q.T
            rhs = es.phi_terms[n].evaluate(t) if n >= 1 else 0.0
            worst = max(worst, float(np.abs(qu - rhs).max()))
            worst_s = max(worst_s, float(np.abs(qu @ es.algebra.Pi.T).max()))
        out.append(worst)
        solv.append(worst_s)
    return {"regular": out, "solvability": solv}


def layer_residuals(es, times=(0.0, 1.0, 5.0)):
    """``||dv_n/dtau - Q v_n - G v_{n-1}||`` maximized over modes and ``times``."""
    Q, G = es.algebra.Q, es.ops.G
    out = []
    for n in range(1, es.order + 1):
        dv = es.v_terms[n].derivative()
        worst = 0.0
        for tau in times:
            r = dv.evaluate(tau) - es.v_terms[n].evaluate(tau) @ Q.T
            if n >= 2:
                r = r - G * es.v_terms[n - 1].evaluate(tau)
            worst = max(worst, float(np.abs(r).max()))
        out.append(worst)
    return out


def matching_errors(es, epsilons=(0.2, 0.05)):
    ref = es.f.coefficients[:, None] * np.ones(es.algebra.N)[None, :]
    return {f"N={N},eps={eps}": float(np.abs(
        truncated_solution(es, N, eps, 0.0).coefficients - ref).max())
        for N in range(es.order + 1) for eps in epsilons}


def laplace_cross_check(es, max_n=3, lams=(0.5, 1.0, 2.0)):
    """Relative gap between the resolvent recursion and the term-wise transform."""
    rows = []
    for n in range(1, min(max_n, es.order) + 1):
        for lam in lams:
            recursion = laplace_singular(es, n, lam)
            direct = es.v_terms[n].laplace(lam)
            scale = max(float(np.abs(direct).max()), 1e-300)
            rows.append({"n": n, "lambda": lam,
                         "relative_error": float(np.abs(recursion - direct).max()) / scale})
    return rows


def check_report(es, tol_regular=1e-9, tol_layer=1e-9, tol_laplace=1e-6):
    """JSON-ready residual and cross-check verdict for an expansion."""
    hier = hierarchy_residuals(es)
    layer = layer_residuals(es)
    lap = laplace_cross_check(es)
    match = matching_errors(es)
    ok = (max(hier["regular"]) <= tol_regular and max(layer, default=0.0) <= tol_layer
          and all(r["relative_error"] <= tol_laplace for r in lap)
          and max(match.values()) <= 1e-12)
    return {"hierarchy_residuals": hier, "layer_residuals": layer,
            "laplace_cross_check": lap, "matching": match,
            "tolerances": {"regular": tol_regular, "layer": tol_layer,
                           "laplace_relative": tol_laplace, "matching": 1e-12},
            "pass": bool(ok)}


class AsymptoticExpansion(BaseEstimator):
    """Estimator front-end: fit on test-function samples, predict fields.

    Parameters
    ----------
    Q, A : array-like
        Generator (N x N) and velocity matrix (d x N).
    order : int
        Highest expansion order kept (0..8).
    n_modes : int
        Odd number of Fourier modes per axis.

    Examples
    --------
    >>> import numpy as np
    >>> est = AsymptoticExpansion(Q=[[-1, 1], [1, -1]], A=[[1, -1]], order=2, n_modes=9)
    >>> x = 2 * np.pi * np.arange(9) / 9
    >>> est.fit(np.sin(x)).predict(t=1.0, epsilon=0.1).shape
    (2, 9)
    """

    def __init__(self, Q=None, A=None, order=4, n_modes=33, tol=None):
        self.Q = Q
        self.A = A
        self.order = order
        self.n_modes = n_modes
        self.tol = tol

    def fit(self, X, y=None):
        """``X`` holds samples of the test function on the uniform grid, shape ``(M,) * d``."""
        tol = self.tol or DEFAULT_TOLERANCES
        model = ChainModel(Q=np.asarray(self.Q, dtype=float),
                           A=np.atleast_2d(np.asarray(self.A, dtype=float)))
        self.algebra_ = chain_algebra(model, tol)
        self.model_ = model
        self.grid_ = ModeGrid(model.d, self.n_modes)
        f = X if isinstance(X, TestFunction) else TestFunction.from_samples(X, self.grid_)
        self.expansion_ = build_expansion(model, f, self.order, self.algebra_, tol)
        return self

    def predict(self, t, epsilon, order=None):
        """Truncated solution on the grid, shape ``(N, M, ..., M)``."""
        order = self.order if order is None else order
        return truncated_solution(self.expansion_, order, epsilon, t).values()

    def transform(self, X):
        """Per-mode coefficients of the truncated solution at ``(t, epsilon)`` pairs in ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([truncated_solution(self.expansion_, self.order, eps, t).coefficients
                         for t, eps in X])
