import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad_vec
from scipy.linalg import expm

from conftest import random_model
from randevo.exceptions import (
    BalanceViolationError,
    ModelValidationError,
    NegativeIntensityError,
    NonPositiveDiffusionError,
    ReducibleChainError,
    RowSumError,
)
from randevo.markov import (
    ChainModel,
    MarkovChainAlgebra,
    chain_algebra,
    diffusion_tensor_pi_weighted,
    exp0,
    validate_model,
)
from randevo.models import two_state_telegraph, uniform


def telegraph_algebra():
    return chain_algebra(two_state_telegraph())


def test_telegraph_closed_forms():
    alg = telegraph_algebra()
    I = np.eye(2)
    Pi = np.full((2, 2), 0.5)
    np.testing.assert_allclose(alg.pi, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(alg.R0, (I - Pi) / 2, atol=1e-12)
    np.testing.assert_allclose(alg.a_hat, [[0.5]], atol=1e-12)
    # exp(Qt) - Pi = e^{-2t} (I - Pi)
    np.testing.assert_allclose(alg.exp0(0.7), np.exp(-1.4) * (I - Pi), atol=1e-14)


def test_deviation_matrix_matches_quadrature(rng):
    model = random_model(rng, n=4, d=2)
    alg = chain_algebra(model)
    horizon = 40.0 / alg.spectral_gap
    integral, _ = quad_vec(lambda t: expm(model.Q * t) - alg.Pi, 0, horizon, epsabs=1e-13)
    np.testing.assert_allclose(alg.R0, integral, atol=1e-8)


def test_resolvent_is_laplace_transform_of_semigroup(rng):
    model = random_model(rng, n=3, d=1)
    alg = chain_algebra(model)
    lam = 0.8
    integral, _ = quad_vec(lambda t: np.exp(-lam * t) * expm(model.Q * t), 0, 60.0,
                           epsabs=1e-13)
    np.testing.assert_allclose(alg.resolvent(lam), integral, atol=1e-8)


def test_exp0_keeps_relative_accuracy_at_long_times():
    alg = telegraph_algebra()
    val = alg.exp0(200.0)
    expected = np.exp(-400.0) * (np.eye(2) - 0.5)
    np.testing.assert_allclose(val, expected, rtol=1e-10)


def test_pi_weighted_variant_is_reported_not_used():
    model = uniform(2)
    alg = chain_algebra(model)
    variant = diffusion_tensor_pi_weighted(model, alg.pi, alg.R0)
    np.testing.assert_allclose(variant, alg.a_hat / 3, atol=1e-12)


@pytest.mark.parametrize("Q, error", [
    ([[-1.0, 1.0], [1.0, -0.5]], RowSumError),
    ([[1.0, -1.0], [1.0, -1.0]], NegativeIntensityError),
    ([[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 0.0]], ReducibleChainError),
])
def test_invalid_generators(Q, error):
    Q = np.array(Q)
    with pytest.raises(error):
        validate_model(ChainModel(Q=Q, A=np.zeros((1, len(Q)))))


def test_velocity_shape_checked():
    with pytest.raises(ModelValidationError):
        validate_model(ChainModel(Q=np.array([[-1.0, 1.0], [1.0, -1.0]]), A=np.ones((1, 3))))


def test_unbalanced_velocity_rejected():
    with pytest.raises(BalanceViolationError):
        chain_algebra(ChainModel(Q=np.array([[-1.0, 1.0], [1.0, -1.0]]), A=np.array([[1.0, 0.0]])))


def test_degenerate_diffusion_rejected():
    # d exceeds the rank available to a centred velocity matrix on two states
    A = np.array([[1.0, -1.0], [2.0, -2.0]])
    with pytest.raises(NonPositiveDiffusionError):
        chain_algebra(ChainModel(Q=np.array([[-1.0, 1.0], [1.0, -1.0]]), A=A))


def test_unbalanced_chain_allowed_without_a_hat():
    alg = chain_algebra(ChainModel(Q=np.array([[-1.0, 1.0], [1.0, -1.0]]),
                                   A=np.array([[1.0, 0.0]])), require_balance=False)
    assert alg.a_hat is None
    np.testing.assert_allclose(alg.balance_residual, [0.5])


def test_estimator_interface():
    est = MarkovChainAlgebra().fit([[-1, 1], [1, -1]], [[1, -1]])
    assert est.get_params() == {"require_balance": True, "tol": None}
    out = est.transform([0.0, 1.0])
    assert out.shape == (2, 2, 2)
    np.testing.assert_allclose(out[0], np.eye(2) - 0.5, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), s=st.floats(0.0, 3.0), t=st.floats(0.0, 3.0))
def test_invariants_on_random_chains(seed, s, t):
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    alg = chain_algebra(model)
    Q, Pi, R0, I = model.Q, alg.Pi, alg.R0, np.eye(model.N)
    atol = 1e-9
    np.testing.assert_allclose(alg.pi @ Q, 0, atol=atol)
    np.testing.assert_allclose(Pi @ Pi, Pi, atol=atol)
    np.testing.assert_allclose(Q @ R0, Pi - I, atol=atol)
    np.testing.assert_allclose(R0 @ Q, Pi - I, atol=atol)
    np.testing.assert_allclose(Pi @ R0, 0, atol=atol)
    np.testing.assert_allclose(R0 @ Pi, 0, atol=atol)
    # exp0 is a semigroup on the range of Q
    np.testing.assert_allclose(exp0(alg, s) @ exp0(alg, t), exp0(alg, s + t), atol=atol)
    np.testing.assert_allclose(np.linalg.eigvalsh(alg.a_hat).min() > 0, True)
