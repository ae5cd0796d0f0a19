"""Fourier modes on the periodic torus and exact exponential-polynomial time profiles.

A spatial function is ``f(x) = sum_k fhat(k) exp(i k.x)`` on ``[0, 2pi)^d``,
so ``grad`` becomes multiplication by ``i k`` and every constant-coefficient
operator acts mode by mode. Time profiles are finite sums

    t -> sum_j t**p_j * exp(mu_j t) * C_j

stored column-wise: ``powers`` (T,), ``rates`` (K, T), ``coefs`` (K, T, N).
Each column shares its power across modes but carries a per-mode exponent,
so regular terms (exponent ``-lambda_k``) and boundary-layer terms (exponents
equal to the eigenvalues of Q) use the same container.
"""
from dataclasses import dataclass
from math import factorial

import numpy as np

from .exceptions import NonDecayingError, ShapeError
from .tolerances import DEFAULT_TOLERANCES


class ModeGrid:
    """Wavevectors ``k`` with components in ``[-(M-1)/2, (M-1)/2]``.

    Modes are stored in ``numpy.fft`` order (``k = 0`` first) so a coefficient
    array reshaped to ``(M,) * d`` is directly an ``fftn`` layout.
    """

    def __init__(self, d=1, M=33):
        if not 1 <= int(d) <= 3:
            raise ShapeError(f"d must be 1..3, got {d}")
        if int(M) < 1 or int(M) % 2 == 0:
            raise ShapeError(f"M must be a positive odd integer, got {M}")
        self.d = int(d)
        self.M = int(M)
        axis = np.fft.fftfreq(self.M, 1.0 / self.M).round().astype(int)
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        self.modes = np.stack([m.ravel() for m in mesh], axis=1)
        neg = np.meshgrid(*([(-np.arange(self.M)) % self.M] * self.d), indexing="ij")
        self.negative_index = np.ravel_multi_index(neg, (self.M,) * self.d).ravel()

    @property
    def shape(self):
        return (self.M,) * self.d

    @property
    def size(self):
        return self.M ** self.d

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"ModeGrid(d={self.d}, M={self.M})"

    def points(self):
        """Grid coordinates ``x_j = 2 pi j / M``, shape ``(M**d, d)``."""
        axis = 2 * np.pi * np.arange(self.M) / self.M
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def index_of(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=int))
        if k.shape != (self.d,) or np.any(np.abs(k) > (self.M - 1) // 2):
            raise ShapeError(f"wavevector {k.tolist()} is outside {self!r}")
        return int(np.ravel_multi_index(tuple(k % self.M), self.shape))


def forward_transform(samples, grid):
    """Fourier coefficients of real samples on the uniform grid."""
    samples = np.asarray(samples, dtype=float)
    if samples.size != grid.size:
        raise ShapeError(f"expected {grid.size} samples for {grid!r}, got {samples.size}")
    return np.fft.fftn(samples.reshape(grid.shape)).ravel() / grid.size


def inverse_transform(coefficients, grid):
    """Grid samples from coefficients; trailing axes of ``coefficients`` are modes.

    Returns the complex array; real fields have negligible imaginary part.
    """
    coefficients = np.asarray(coefficients)
    if coefficients.shape[-1] != grid.size:
        raise ShapeError(f"expected {grid.size} modes, got {coefficients.shape[-1]}")
    lead = coefficients.shape[:-1]
    axes = tuple(range(len(lead), len(lead) + grid.d))
    cube = coefficients.reshape(lead + grid.shape)
    return np.fft.ifftn(cube, axes=axes) * grid.size


def gradient_symbols(A, modes):
    """Per-mode diagonal of ``A grad``: entry ``[k, i] = i * (a(i) . k)``, shape ``(K, N)``."""
    return 1j * (np.asarray(modes, dtype=float) @ np.asarray(A, dtype=float))


def gradient_operator(model, k):
    """``diag(i a(i).k)`` for a single wavevector."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return np.diag(gradient_symbols(model.A, k[np.newaxis, :])[0])


@dataclass
class TestFunction:
    """Real periodic test function given by its Fourier coefficients."""

    grid: ModeGrid
    coefficients: np.ndarray
    name: str = "custom"

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        if self.coefficients.shape != (self.grid.size,):
            raise ShapeError(
                f"expected {self.grid.size} coefficients, got {self.coefficients.shape}")
        mirror = np.conj(self.coefficients[self.grid.negative_index])
        if np.abs(mirror - self.coefficients).max(initial=0.0) > 1e-12 * max(
                1.0, np.abs(self.coefficients).max()):
            raise ValueError("coefficients are not Hermitian-symmetric; f would be complex")

    @classmethod
    def from_samples(cls, samples, grid, name="samples"):
        coeffs = forward_transform(samples, grid)
        # enforce exact Hermitian symmetry lost to FFT rounding
        coeffs = 0.5 * (coeffs + np.conj(coeffs[grid.negative_index]))
        return cls(grid, coeffs, name)

    @classmethod
    def from_callable(cls, func, grid, name="callable"):
        x = grid.points()
        return cls.from_samples(func(x), grid, name)

    @property
    def support(self):
        """Indices of modes with non-zero coefficient."""
        return np.flatnonzero(self.coefficients != 0)

    def values(self):
        return inverse_transform(self.coefficients, self.grid).real

    def __call__(self, x):
        """Evaluate by direct Fourier summation at arbitrary points ``x`` (..., d)."""
        x = np.asarray(x, dtype=float)
        idx = self.support
        phase = x @ self.grid.modes[idx].T
        return (np.exp(1j * phase) @ self.coefficients[idx]).real


def sin_k(grid, k=None, amplitude=1.0):
    """``amplitude * sin(k.x)``; default ``k`` is the first unit vector."""
    if k is None:
        k = np.eye(grid.d, dtype=int)[0]
    k = np.atleast_1d(np.asarray(k, dtype=int))
    coeffs = np.zeros(grid.size, dtype=complex)
    coeffs[grid.index_of(k)] += amplitude / 2j
    coeffs[grid.index_of(-k)] -= amplitude / 2j
    return TestFunction(grid, coeffs, f"sin_k{k.tolist()}")


def constant(grid, value=1.0):
    coeffs = np.zeros(grid.size, dtype=complex)
    coeffs[0] = value
    return TestFunction(grid, coeffs, f"constant({value})")


_TRIG_TERMS = [
    # (wavevector padded with zeros to d, amplitude, phase)
    ((1, 0, 0), 1.0, 0.0),
    ((2, 0, 0), 0.5, 0.3),
    ((0, 1, 0), 0.4, 1.1),
    ((1, 1, 0), 0.3, -0.7),
    ((3, 0, 0), 0.2, 2.0),
    ((0, 0, 1), 0.25, 0.5),
    ((1, -1, 1), 0.15, -1.3),
]


def trig_poly(grid, n_terms=5):
    """Fixed trigonometric polynomial with ``n_terms`` distinct wavevector pairs.

    Terms are ``amp * cos(k.x + phase)``; wavevectors that need more axes than
    ``grid.d`` are skipped, and 1-D grids fall back to harmonics ``k = 1..n``.
    """
    coeffs = np.zeros(grid.size, dtype=complex)
    if grid.d == 1:
        terms = [((j,), 1.0 / j, 0.4 * j) for j in range(1, n_terms + 1)]
    else:
        terms = [(k[:grid.d], amp, ph) for k, amp, ph in _TRIG_TERMS
                 if not any(k[grid.d:])][:n_terms]
    if len(terms) < n_terms:
        raise ValueError(f"cannot build {n_terms} distinct terms in d={grid.d}")
    for k, amp, phase in terms:
        coeffs[grid.index_of(k)] += 0.5 * amp * np.exp(1j * phase)
        coeffs[grid.index_of(np.negative(k))] += 0.5 * amp * np.exp(-1j * phase)
    return TestFunction(grid, coeffs, f"trig_poly({n_terms})")


def gaussian_bump(grid, width=0.5):
    """Periodized Gaussian centred at ``pi``, sampled on the grid and truncated to it."""
    def bump(x):
        r = (x - np.pi + np.pi) % (2 * np.pi) - np.pi
        return np.exp(-np.sum(r ** 2, axis=1) / (2 * width ** 2))
    return TestFunction.from_callable(bump, grid, f"gaussian_bump({width})")


@dataclass
class StateField:
    """Per-mode coefficients of an N-component field, shape ``(K, N)``, at time ``t``."""

    grid: ModeGrid
    coefficients: np.ndarray
    t: float = 0.0

    def values(self):
        """Real grid values, shape ``(N, M, ..., M)``."""
        return inverse_transform(self.coefficients.T, self.grid).real

    def max_imag(self):
        return float(np.abs(inverse_transform(self.coefficients.T, self.grid).imag).max())

    def __call__(self, x):
        """Direct Fourier summation at points ``x`` (..., d); returns (..., N)."""
        x = np.asarray(x, dtype=float)
        phase = np.exp(1j * (x @ self.grid.modes.T))
        return (phase @ self.coefficients).real

    def __sub__(self, other):
        return StateField(self.grid, self.coefficients - other.coefficients, self.t)

    def sup_norm(self):
        return float(np.abs(self.values()).max())

    def l2_norm(self):
        """Normalized L2 norm (Parseval): ``sqrt(sum_k sum_i |c_ki|^2)``."""
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))


class EPFunction:
    """Exponential-polynomial time profile per Fourier mode.

    Parameters
    ----------
    powers : (T,) int array
    rates : (K, T) complex array
    coefs : (K, T, N) complex array
    """

    def __init__(self, powers, rates, coefs, tol=DEFAULT_TOLERANCES):
        self.powers = np.asarray(powers, dtype=int).reshape(-1)
        self.rates = np.asarray(rates, dtype=complex)
        self.coefs = np.asarray(coefs, dtype=complex)
        self.tol = tol
        K, T, _ = self.coefs.shape
        if self.rates.shape != (K, T) or self.powers.shape != (T,):
            raise ShapeError(
                f"inconsistent EPFunction shapes: powers {self.powers.shape}, "
                f"rates {self.rates.shape}, coefs {self.coefs.shape}")

    @classmethod
    def zeros(cls, K, N, tol=DEFAULT_TOLERANCES):
        return cls(np.zeros(0, int), np.zeros((K, 0)), np.zeros((K, 0, N)), tol)

    @classmethod
    def exponential(cls, rate, vectors, power=0, tol=DEFAULT_TOLERANCES):
        """Single column ``t**power exp(rate_k t) vectors[k]``."""
        vectors = np.asarray(vectors, dtype=complex)
        K = vectors.shape[0]
        rate = np.broadcast_to(np.asarray(rate, dtype=complex), (K,))
        return cls([power], rate[:, None], vectors[:, None, :], tol)

    @property
    def n_modes(self):
        return self.coefs.shape[0]

    @property
    def n_states(self):
        return self.coefs.shape[2]

    @property
    def n_terms(self):
        return len(self.powers)

    def copy(self):
        return EPFunction(self.powers.copy(), self.rates.copy(), self.coefs.copy(), self.tol)

    def __repr__(self):
        return f"EPFunction(modes={self.n_modes}, terms={self.n_terms}, states={self.n_states})"

    def terms(self, mode):
        """Non-zero ``(power, rate, coefficient)`` triples of one mode."""
        return [(int(p), complex(self.rates[mode, j]), self.coefs[mode, j].copy())
                for j, p in enumerate(self.powers) if np.any(self.coefs[mode, j] != 0)]

    # -- algebra ---------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, float)) and other == 0:
            return self.copy()
        return EPFunction(np.concatenate([self.powers, other.powers]),
                          np.concatenate([self.rates, other.rates], axis=1),
                          np.concatenate([self.coefs, other.coefs], axis=1),
                          self.tol).merged()

    __radd__ = __add__

    def __neg__(self):
        return EPFunction(self.powers, self.rates, -self.coefs, self.tol)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor):
        return EPFunction(self.powers, self.rates, self.coefs * factor, self.tol)

    def apply(self, matrix):
        """Left-multiply coefficient vectors by ``matrix`` of shape (N, N) or (K, N, N)."""
        matrix = np.asarray(matrix)
        if matrix.ndim == 2:
            coefs = np.einsum("ij,ktj->kti", matrix, self.coefs)
        else:
            coefs = np.einsum("kij,ktj->kti", matrix, self.coefs)
        return EPFunction(self.powers, self.rates, coefs, self.tol)

    def apply_diagonal(self, diag):
        """Multiply by per-mode diagonal matrices given as a (K, N) array."""
        return EPFunction(self.powers, self.rates, self.coefs * diag[:, None, :], self.tol)

    def merged(self):
        """Combine columns with equal power and (within tolerance) equal rates."""
        keep_p, keep_r, keep_c = [], [], []
        for j, p in enumerate(self.powers):
            rate, coef = self.rates[:, j], self.coefs[:, j]
            if not np.any(coef):
                continue
            for slot, (q, r) in enumerate(zip(keep_p, keep_r)):
                if q == p and _same_rate(r, rate, self.tol):
                    keep_c[slot] = keep_c[slot] + coef
                    break
            else:
                keep_p.append(p)
                keep_r.append(rate)
                keep_c.append(coef)
        K, N = self.n_modes, self.n_states
        if not keep_p:
            return EPFunction.zeros(K, N, self.tol)
        return EPFunction(np.array(keep_p), np.stack(keep_r, axis=1),
                          np.stack(keep_c, axis=1), self.tol)

    # -- calculus --------------------------------------------------------
    def __call__(self, t):
        return self.evaluate(t)

    def evaluate(self, t):
        """Values at time ``t``, shape ``(K, N)``."""
        t = float(t)
        if t < 0:
            raise ValueError(f"t must be >= 0, got {t}")
        if self.n_terms == 0:
            return np.zeros((self.n_modes, self.n_states), dtype=complex)
        growth = self.rates.real * t
        live = np.any(self.coefs != 0, axis=2)
        if np.any(growth[live] > self.tol.overflow_exponent):
            k, j = np.argwhere((growth > self.tol.overflow_exponent) & live)[0]
            raise OverflowError(f"exp({self.rates[k, j]:.4g} * {t}) overflows in mode {k}")
        weights = np.exp(self.rates * t) * (t ** self.powers)[None, :]
        return np.einsum("kt,ktn->kn", weights, self.coefs)

    def derivative(self):
        """Term-wise time derivative."""
        out_p = np.concatenate([self.powers, np.maximum(self.powers - 1, 0)])
        out_r = np.concatenate([self.rates, self.rates], axis=1)
        out_c = np.concatenate([self.coefs * self.rates[:, :, None],
                                self.coefs * self.powers[None, :, None]], axis=1)
        return EPFunction(out_p, out_r, out_c, self.tol).merged()

    def convolve_scalar(self, rho):
        """``int_0^t exp(rho (t - s)) f(s) ds`` with a per-mode scalar exponent ``rho`` (K,)."""
        rho = np.broadcast_to(np.asarray(rho, dtype=complex), (self.n_modes,))
        out_p, out_r, out_c = [], [], []
        for j, m in enumerate(self.powers):
            nu, C = self.rates[:, j], self.coefs[:, j]
            delta = nu - rho
            scale = np.maximum(1.0, np.maximum(np.abs(nu), np.abs(rho)))
            resonant = np.abs(delta) <= self.tol.resonance * scale
            ds = np.where(resonant, 1.0, delta)
            off = np.where(resonant, 0.0, 1.0)[:, None]
            for q in range(m + 1):
                w = (-1) ** (m - q) * factorial(m) / factorial(q) / ds ** (m - q + 1)
                out_p.append(q)
                out_r.append(nu)
                out_c.append(C * w[:, None] * off)
            out_p.append(0)
            out_r.append(rho)
            out_c.append(-C * ((-1) ** m * factorial(m) / ds ** (m + 1))[:, None] * off)
            out_p.append(m + 1)
            out_r.append(rho)
            out_c.append(C / (m + 1) * (1.0 - off))
        return self._from_columns(out_p, out_r, out_c)

    def integrate(self):
        """Antiderivative vanishing at ``t = 0``."""
        return self.convolve_scalar(0.0)

    def check_decaying(self):
        """Raise NonDecayingError if a non-negligible term has ``Re(mu) >= -decay``."""
        if self.n_terms == 0:
            return self
        size = np.abs(self.coefs).max(axis=2)
        floor = self.tol.coefficient_zero * max(1.0, float(size.max()))
        bad = (self.rates.real >= -self.tol.decay) & (size > floor)
        if np.any(bad):
            k, j = np.argwhere(bad)[0]
            raise NonDecayingError(
                f"term t^{self.powers[j]} exp({self.rates[k, j]:.4g} t) in mode {k} "
                f"has coefficient norm {size[k, j]:.3e}")
        return self

    def tail_integral(self):
        """``int_0^inf f``, shape ``(K, N)``."""
        self.check_decaying()
        out = np.zeros((self.n_modes, self.n_states), dtype=complex)
        for j, m in enumerate(self.powers):
            nu = self.rates[:, j]
            live = np.any(self.coefs[:, j] != 0, axis=1)
            w = np.zeros(self.n_modes, dtype=complex)
            w[live] = factorial(m) / (-nu[live]) ** (m + 1)
            out += self.coefs[:, j] * w[:, None]
        return out

    def tail_from(self):
        """The function ``t -> int_t^inf f(s) ds`` as an EPFunction."""
        self.check_decaying()
        out_p, out_r, out_c = [], [], []
        for j, m in enumerate(self.powers):
            nu, C = self.rates[:, j], self.coefs[:, j]
            live = np.any(C != 0, axis=1)
            safe = np.where(live, -nu, 1.0)
            for q in range(m + 1):
                out_p.append(q)
                out_r.append(nu)
                out_c.append(C * (factorial(m) / factorial(q) / safe ** (m - q + 1))[:, None])
        return self._from_columns(out_p, out_r, out_c)

    def laplace(self, lam):
        """``int_0^inf exp(-lam t) f(t) dt``, shape ``(K, N)``; needs ``Re(lam - mu) > 0``."""
        out = np.zeros((self.n_modes, self.n_states), dtype=complex)
        for j, m in enumerate(self.powers):
            shift = lam - self.rates[:, j]
            live = np.any(self.coefs[:, j] != 0, axis=1)
            if np.any(shift.real[live] <= 0):
                raise NonDecayingError(f"Laplace transform diverges at lambda={lam}")
            w = np.where(live, factorial(m) / np.where(live, shift, 1.0) ** (m + 1), 0.0)
            out += self.coefs[:, j] * w[:, None]
        return out

    def convolve_exp0(self, algebra):
        """``int_0^t exp0(Q (t - s)) f(s) ds`` using the spectral projectors of Q."""
        self.check_decaying()
        total = EPFunction.zeros(self.n_modes, self.n_states, self.tol)
        mu, projectors = algebra.decaying_modes
        for mu_j, P_j in zip(mu, projectors):
            total = total + self.apply(P_j).convolve_scalar(mu_j)
        return total

    def _from_columns(self, powers, rates, coefs):
        K, N = self.n_modes, self.n_states
        if not powers:
            return EPFunction.zeros(K, N, self.tol)
        return EPFunction(np.array(powers), np.stack(rates, axis=1),
                          np.stack(coefs, axis=1), self.tol).merged()


def _same_rate(a, b, tol):
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return bool(np.all(np.abs(a - b) <= tol.resonance * scale))


def ep_evaluate(f, t, grid=None):
    """Evaluate ``f`` at ``t``; returns a StateField when ``grid`` is given."""
    values = f.evaluate(t)
    return values if grid is None else StateField(grid, values, float(t))


def ep_integrate_0_t(f):
    return f.integrate()


def ep_tail_integral(f):
    return f.tail_integral()


def ep_convolve_exp0(algebra, g):
    return g.convolve_exp0(algebra)
