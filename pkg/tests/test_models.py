import numpy as np
import pytest
import scipy.special
import scipy.stats

from cheb import ChebGrid, dense_values, tt_integrate
from config import PROBLEM_DEFAULTS, REFERENCE_VALUES
from fpe_solver import check_drift_divergence, solve, tt_from_function
from models import (DumbbellParams, OUParams, benchmark, dumbbell_div_terms, dumbbell_drift,
                    dumbbell_problem, gaussian_ic, kramer_observables, kramer_tensor, lyapunov_solve,
                    ou_analytic_1d, ou_covariance_quad, ou_div_terms, ou_drift, ou_mean, ou_problem,
                    ou_sigma_1d, ou_stationary, ou_transition, oup_params, phi_gradient)
from tt_core import tt_to_full


# ===== PARAMETERS =====

def test_oup_params_defaults():
    params = oup_params(3)
    assert params.dim == 3
    assert params.D_c == 0.5
    assert params.domain == ((-5.0, 5.0),) * 3
    np.testing.assert_array_equal(params.mu, np.zeros(3))


def test_oup_params_validation():
    with pytest.raises(ValueError):
        oup_params(2)
    with pytest.raises(ValueError):
        OUParams(A=[[1.0, 2.0], [2.0, 4.0]], mu=[0.0, 0.0])
    with pytest.raises(ValueError):
        OUParams(A=[[1.0]], mu=[0.0, 0.0])
    with pytest.raises(ValueError):
        OUParams(A=[[1.0]], mu=[0.0], s=0.0)


def test_params_are_read_only():
    params = oup_params(1)
    with pytest.raises(ValueError):
        params.A[0, 0] = 2.0


def test_gaussian_ic():
    rho0 = gaussian_ic(1.0, 3)
    assert rho0(np.zeros((1, 3)))[0] == pytest.approx((2 * np.pi) ** -1.5)
    assert gaussian_ic(2.0, 1)(np.array([[0.0]]))[0] == pytest.approx(1 / np.sqrt(4 * np.pi))
    with pytest.raises(ValueError):
        gaussian_ic(-1.0, 2)


@pytest.mark.parametrize('s, d, bound, N', [(1.0, 3, 5.0, 30), (2.0, 2, 8.0, 40), (1.0, 1, 10.0, 60)])
def test_gaussian_ic_mass_on_grid(s, d, bound, N):
    grid = ChebGrid.uniform(d, N, -bound, bound)
    rho = tt_from_function(gaussian_ic(s, d), grid, 1e-12)
    expected = scipy.special.erf(bound / np.sqrt(2 * s)) ** d
    assert tt_integrate(rho, grid) == pytest.approx(expected, abs=1e-7)


# ===== ORNSTEIN-UHLENBECK =====

def test_ou_drift_and_divergence():
    params = OUParams(A=[[2.0, 1.0], [0.0, 3.0]], mu=[1.0, -1.0])
    X = np.array([[0.0, 0.0], [1.0, -1.0]])
    np.testing.assert_allclose(ou_drift(params)(X, 0.0), [[1.0, -3.0], [0.0, 0.0]])
    np.testing.assert_allclose(ou_div_terms(params)(X, 0.0), [-5.0, -5.0])
    assert check_drift_divergence(ou_problem(params), np.random.default_rng(1).uniform(-3, 3, (20, 2))) <= 1e-6


def test_sigma_1d():
    assert ou_sigma_1d(1.0, 1.0) == pytest.approx(0.5 * (1 - np.exp(-2)))
    assert ou_sigma_1d(0.0, 1.0) == 0.0
    assert ou_sigma_1d(100.0, 2.0, 1.0) == pytest.approx(0.5)


def test_analytic_1d_at_start_and_end():
    params = oup_params(1)
    density = ou_analytic_1d(params)
    x = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(density(x, 0.0), gaussian_ic(1.0, 1)(x[:, None]))
    stationary = ou_stationary(params)
    np.testing.assert_allclose(density(x, 50.0), stationary(x[:, None]), rtol=1e-12)


def test_analytic_1d_with_shifted_mean():
    params = OUParams(A=[[2.0]], mu=[1.5])
    x = np.linspace(-8, 8, 2001)
    values = ou_analytic_1d(params)(x, 0.5)
    dx = x[1] - x[0]
    assert np.sum(values) * dx == pytest.approx(1.0, abs=1e-8)
    assert np.sum(x * values) * dx == pytest.approx(1.5 * (1 - np.exp(-1.0)), abs=1e-8)


@pytest.mark.parametrize('t', [0.1, 0.5, 2.0])
def test_analytic_1d_solves_fokker_planck(t):
    params = OUParams(A=[[2.0]], mu=[1.5])
    a, mu, D_c = 2.0, 1.5, params.D_c
    rho = ou_analytic_1d(params)
    x = np.linspace(-4.0, 5.0, 37)
    h = 1e-4

    def flux(y):
        return a * (mu - y) * rho(y, t)

    drho_dt = (rho(x, t + h) - rho(x, t - h)) / (2 * h)
    dflux_dx = (flux(x + h) - flux(x - h)) / (2 * h)
    d2rho_dx2 = (rho(x + h, t) - 2 * rho(x, t) + rho(x - h, t)) / h ** 2
    residual = drho_dt + dflux_dx - D_c * d2rho_dx2
    assert np.max(np.abs(residual)) <= 1e-6


def test_analytic_1d_rejects_multivariate():
    with pytest.raises(ValueError):
        ou_analytic_1d(oup_params(3))


def test_lyapunov_identity():
    np.testing.assert_allclose(lyapunov_solve(np.eye(3), 0.5), 0.5 * np.eye(3), atol=1e-14)


@pytest.mark.parametrize('d', [3, 5])
def test_lyapunov_residual(d):
    A = np.array(oup_params(d).A)
    W = lyapunov_solve(A, 0.5)
    np.testing.assert_allclose(A @ W + W @ A.T, np.eye(d), atol=1e-12)
    np.testing.assert_allclose(W, W.T)
    assert np.all(np.linalg.eigvalsh(W) > 0)


def test_lyapunov_singular():
    with pytest.raises(ValueError):
        lyapunov_solve(np.array([[1.0, 0.0], [0.0, -1.0]]), 0.5)


def test_stationary_matches_multivariate_normal(rng):
    params = oup_params(3)
    W = lyapunov_solve(params.A, params.D_c)
    X = rng.uniform(-2, 2, (30, 3))
    np.testing.assert_allclose(ou_stationary(params)(X), scipy.stats.multivariate_normal(np.zeros(3), W).pdf(X),
                               rtol=1e-10)


def test_stationary_mass_on_grid():
    params = oup_params(3)
    grid = ChebGrid.uniform(3, 30, -5.0, 5.0)
    rho = tt_from_function(ou_stationary(params), grid, 1e-10)
    assert tt_integrate(rho, grid) == pytest.approx(1.0, abs=1e-6)


def test_mean():
    params = OUParams(A=[[1.0]], mu=[0.0])
    np.testing.assert_allclose(ou_mean(np.log(2.0), [1.0], params), [0.5])
    shifted = OUParams(A=np.eye(2), mu=[2.0, -2.0])
    np.testing.assert_allclose(ou_mean(50.0, [0.0, 0.0], shifted), [2.0, -2.0], atol=1e-12)


def test_covariance_matches_closed_form_1d():
    params = OUParams(A=[[1.0]], mu=[0.0])
    for t in (0.1, 1.0, 3.0):
        assert ou_covariance_quad(t, params)[0, 0] == pytest.approx(ou_sigma_1d(t, 1.0), rel=1e-9)
    np.testing.assert_array_equal(ou_covariance_quad(0.0, params), [[0.0]])


def test_covariance_tends_to_lyapunov():
    params = oup_params(3)
    np.testing.assert_allclose(ou_covariance_quad(30.0, params), lyapunov_solve(params.A, params.D_c),
                               atol=1e-8)


def test_transition_density_1d():
    params = OUParams(A=[[1.0]], mu=[0.0])
    x = np.linspace(-2, 3, 11)
    t, x0 = 0.7, 1.2
    var = ou_sigma_1d(t, 1.0)
    expected = np.exp(-(x - x0 * np.exp(-t)) ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var)
    np.testing.assert_allclose(ou_transition(params)(x[:, None], t, [x0]), expected, rtol=1e-8)
    with pytest.raises(ValueError):
        ou_transition(params)(x[:, None], 0.0, [x0])


# ===== DUMBBELL =====

def test_dumbbell_divergence_at_origin():
    params = DumbbellParams()
    assert dumbbell_div_terms(params)(np.zeros((1, 3)), 0.0)[0] == pytest.approx(3.3)
    np.testing.assert_array_equal(dumbbell_drift(params)(np.zeros((1, 3)), 0.0), np.zeros((1, 3)))


def test_dumbbell_divergence_matches_finite_differences(rng):
    points = rng.uniform(-3, 3, (40, 3))
    assert check_drift_divergence(dumbbell_problem(), points) <= 1e-6


def test_dumbbell_shear_term():
    params = DumbbellParams(alpha=0.0)
    F = dumbbell_drift(params)(np.array([[1.0, 2.0, 3.0]]), 0.0)
    np.testing.assert_allclose(F, [[-0.5 + 2.0, -1.0, -1.5]])


def test_phi_gradient_far_from_origin():
    params = DumbbellParams()
    X = np.array([[20.0, 0.0, 0.0]])
    np.testing.assert_allclose(phi_gradient(params, X), X)


def test_dumbbell_problem_shape():
    p = dumbbell_problem()
    assert p.dim == 3
    assert p.domain == ((-10.0, 10.0),) * 3
    assert p.diffusion == 0.5


def test_kramer_tensor_matches_dense():
    params = DumbbellParams()
    grid = ChebGrid.uniform(3, 12, -10.0, 10.0)
    rho = tt_from_function(gaussian_ic(1.0, 3), grid, 1e-12)

    def weight(X):
        return X[:, 0] * phi_gradient(params, X)[:, 1]

    result = tt_to_full(kramer_tensor(rho, grid, weight, 1e-10)).data
    expected = dense_values(lambda X: gaussian_ic(1.0, 3)(X) * weight(X), grid)
    assert np.linalg.norm(result - expected) <= 1e-8 * np.linalg.norm(expected)


def test_kramer_observables_vanish_for_isotropic_density():
    params = DumbbellParams()
    grid = ChebGrid.uniform(3, 30, -10.0, 10.0)
    rho = tt_from_function(gaussian_ic(1.0, 3), grid, 1e-10)
    psi, eta = kramer_observables(rho, grid, params)
    assert abs(psi) <= 1e-6
    assert abs(eta) <= 1e-6


def test_kramer_psi_vanishes_for_swap_symmetric_density():
    params = DumbbellParams()
    grid = ChebGrid.uniform(3, 30, -10.0, 10.0)
    shift = np.array([1.0, 1.0, 0.0])
    base = gaussian_ic(1.0, 3)
    rho = tt_from_function(lambda X: 0.5 * (base(X - shift) + base(X + shift)), grid, 1e-10)
    psi, _ = kramer_observables(rho, grid, params)
    assert abs(psi) <= 1e-6


# ===== REGISTRY =====

@pytest.mark.parametrize('name, observers', [('oup1d', 2), ('oup3d', 1), ('oup5d', 1), ('dumbbell', 1)])
def test_benchmark_registry(name, observers):
    p, obs = benchmark(name)
    assert p.name == name
    assert p.dim == PROBLEM_DEFAULTS[name]['dim']
    assert p.horizon == PROBLEM_DEFAULTS[name]['t_final']
    assert len(obs) == observers


def test_benchmark_horizon_override():
    p, _ = benchmark('oup3d', t_final=0.5)
    assert p.horizon == 0.5


def test_unknown_benchmark():
    with pytest.raises(ValueError):
        benchmark('oup2d')


# ===== FULL RUNS =====

def run_benchmark(name, grid_points=None, time_points=None):
    defaults = PROBLEM_DEFAULTS[name]
    p, observers = benchmark(name)
    N = grid_points or defaults['grid_points']
    M = time_points or defaults['time_points']
    return solve(p, [N] * p.dim, M, defaults['eps'], observers=observers)


@pytest.mark.slow
def test_oup1d_benchmark():
    _, report = run_benchmark('oup1d')
    last = report.last
    assert last['err_analytic'] <= REFERENCE_VALUES['oup1d']['err_analytic']
    assert last['err_stationary'] <= REFERENCE_VALUES['oup1d']['err_stationary']


@pytest.mark.slow
def test_oup3d_benchmark():
    _, report = run_benchmark('oup3d')
    frame = report.to_frame()
    assert frame['err_stationary'].iloc[-1] <= REFERENCE_VALUES['oup3d']['err_stationary']
    assert frame['erank'].max() <= REFERENCE_VALUES['oup3d']['erank_max']
    assert np.all(np.abs(1 - frame['mass']) <= 1e-2)


@pytest.mark.slow
def test_dumbbell_scaled_benchmark():
    ref = REFERENCE_VALUES['dumbbell']
    _, report = run_benchmark('dumbbell', grid_points=40)
    last = report.last
    assert last['psi'] == pytest.approx(ref['psi'], abs=ref['tolerance_scaled'])
    assert last['eta'] == pytest.approx(ref['eta'], abs=ref['tolerance_scaled'])


@pytest.mark.slow
def test_oup5d_benchmark():
    ref = REFERENCE_VALUES['oup5d']
    _, report = run_benchmark('oup5d')
    last = report.last
    assert last['err_stationary'] <= ref['err_stationary']
    lo, hi = ref['erank_final']
    assert lo <= last['erank'] <= hi
