import numpy as np
import pytest
from scipy.integrate import solve_ivp

from randevo import evolution
from randevo.evolution import (
    exact_solution,
    generator_inverse_norm,
    mc_estimate,
    path_generator,
    remainder_bound,
    residual,
    simulate_trajectory,
    terminal_displacements,
)
from randevo.exceptions import InvalidHorizonError
from randevo.expansion import build_expansion
from randevo.models import two_state_telegraph, uniform
from randevo.spectral import ModeGrid, constant, sin_k, trig_poly


@pytest.fixture(scope="module")
def telegraph():
    return two_state_telegraph()


def test_exact_solution_against_ode_integrator(telegraph):
    grid = ModeGrid(1, 9)
    f = trig_poly(grid, 3)
    eps, t = 0.3, 0.8
    got = exact_solution(telegraph, f, grid, eps, t).coefficients
    for k in f.support:
        G = 1j * grid.modes[k, 0] * np.diag(telegraph.A[0])
        gen = telegraph.Q / eps ** 2 + G / eps
        sol = solve_ivp(lambda s, u: gen @ u, (0, t), f.coefficients[k] * np.ones(2, complex),
                        method="DOP853", rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(got[k], sol.y[:, -1], atol=1e-9)


def test_constants_are_invariant(telegraph):
    grid = ModeGrid(1, 5)
    sol = exact_solution(telegraph, constant(grid, 2.5), grid, 0.1, 3.0)
    np.testing.assert_allclose(sol.values(), 2.5, atol=1e-12)


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.02])
def test_maximum_principle(telegraph, eps):
    # u_i(x, t) = E_i f(x(t)), so |u| never exceeds sup |f| = 1
    grid = ModeGrid(1, 33)
    for t in (0.1, 1.0, 4.0):
        assert exact_solution(telegraph, sin_k(grid), grid, eps, t).sup_norm() <= 1 + 1e-12


def test_exact_solution_approaches_heat_limit(telegraph):
    grid = ModeGrid(1, 9)
    sol = exact_solution(telegraph, sin_k(grid), grid, 0.01, 1.0)
    x = grid.points()[:, 0]
    # the first correction is eps * (1/2, -1/2) cos x exp(-t/2)
    np.testing.assert_allclose(sol.values(), [np.exp(-0.5) * np.sin(x)] * 2, atol=0.01)
    first = 0.01 * np.outer([0.5, -0.5], np.cos(x)) * np.exp(-0.5)
    np.testing.assert_allclose(sol.values(), np.exp(-0.5) * np.sin(x) + first, atol=1e-4)


def test_single_trajectory_reproduces_vectorized_path(telegraph):
    seed, t, eps = 7, 0.5, 0.2
    disp = terminal_displacements(telegraph, [1], t, eps, 5, seed)
    for p in range(5):
        traj = simulate_trajectory(telegraph, 1, t, eps, path_generator(seed, p))
        np.testing.assert_allclose(traj.position, np.mod(disp[0, p], 2 * np.pi), atol=1e-12)
        assert traj.states[0] == 1
        assert np.all(np.diff(traj.jump_times) > 0)


def test_mc_is_deterministic_and_chunk_independent(telegraph, monkeypatch):
    f = sin_k(ModeGrid(1, 5))
    a = mc_estimate(telegraph, f, [0.3], 0.5, 0.2, paths=3000, seed=11)
    b = mc_estimate(telegraph, f, [0.3], 0.5, 0.2, paths=3000, seed=11)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.stderr, b.stderr)
    monkeypatch.setattr(evolution, "MC_CHUNK", 700)
    c = mc_estimate(telegraph, f, [0.3], 0.5, 0.2, paths=3000, seed=11)
    assert np.array_equal(a.mean, c.mean)
    d = mc_estimate(telegraph, f, [0.3], 0.5, 0.2, paths=3000, seed=12)
    assert not np.array_equal(a.mean, d.mean)


def test_mc_agrees_with_exact_solution():
    model = uniform(2)
    grid = ModeGrid(2, 7)
    f = trig_poly(grid, 3)
    x = np.random.default_rng(3).uniform(0, 2 * np.pi, (5, 2))
    est = mc_estimate(model, f, x, 0.5, 0.2, paths=20000, seed=5)
    exact = exact_solution(model, f, grid, 0.2, 0.5)(x)
    assert np.all(np.abs(est.mean - exact) <= 4 * est.stderr)


def test_stderr_follows_square_root_law(telegraph):
    f = sin_k(ModeGrid(1, 5))
    small = mc_estimate(telegraph, f, [1.0], 1.0, 0.3, paths=1000, seed=2)
    large = mc_estimate(telegraph, f, [1.0], 1.0, 0.3, paths=16000, seed=2)
    np.testing.assert_allclose(small.stderr / large.stderr, 4.0, rtol=0.15)


def test_mc_input_checks(telegraph):
    f = sin_k(ModeGrid(1, 5))
    with pytest.raises(InvalidHorizonError):
        mc_estimate(telegraph, f, [0.0], 0.0, 0.1, paths=200)
    with pytest.raises(ValueError):
        mc_estimate(telegraph, f, [0.0], 1.0, 0.1, paths=10)
    with pytest.raises(ValueError):
        mc_estimate(telegraph, f, [0.0], 1.0, -0.1, paths=200)


def test_residual_report_and_bound(telegraph):
    grid = ModeGrid(1, 9)
    es = build_expansion(telegraph, sin_k(grid), order=3)
    rep = residual(telegraph, es, grid, 2, 0.1, 1.0)
    assert rep.initial_remainder_sup <= 1e-12
    assert 0 < rep.remainder_sup < 1e-2
    out = remainder_bound(telegraph, grid, 0.1, rep)
    assert out is rep.bound
    assert out["k0_block_excluded"]
    # the bound is proportional to the initial remainder, which matching makes zero,
    # so it cannot dominate a non-zero remainder at t > 0
    assert out["bound"] == 0.0
    assert out["bound_satisfied"] is False


def test_generator_inverse_norm_matches_direct_inverse(telegraph):
    grid = ModeGrid(1, 7)
    eps = 0.2
    direct = 0.0
    for k in grid.modes[1:, 0]:
        block = telegraph.Q / eps ** 2 + 1j * k * np.diag(telegraph.A[0]) / eps
        direct = max(direct, np.linalg.norm(np.linalg.inv(block), 2))
    assert generator_inverse_norm(telegraph, grid, eps) == pytest.approx(direct, rel=1e-10)
