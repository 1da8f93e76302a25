"""
Benchmark problems and their analytic references.

- Ornstein-Uhlenbeck process f(x) = A (mu - x) in 1, 3 and 5 dimensions,
  with the analytic 1-D solution, the multivariate mean, covariance,
  transitional and stationary densities
- Dumbbell polymer model with the Kramer observables psi and eta
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.integrate
import scipy.linalg

from cheb import ChebGrid, tt_integrate
from config import DEFAULT_SEED, INITIAL_VARIANCE, PROBLEM_DEFAULTS
from fpe_solver import Observer, ProblemDef, Stepper, error_observer
from tt_core import TTTensor, tt_elements, tt_round
from tt_cross import CrossConfig, CrossInfo, cross_approximate

logger = logging.getLogger(__name__)

# Drift matrices of the multivariate benchmarks
OU_MATRICES = {
    1: [[1.0]],
    3: [
        [1.5, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.5, 0.3, 1.0],
    ],
    5: [
        [1.5, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0],
        [0.5, 0.3, 0.2, 0.0, 1.0],
    ],
}

# cross accuracy for the Kramer integrands; psi is a difference of two O(1) integrals
KRAMER_EPS = 1e-10
KRAMER_KICK_RANK = 4


@dataclass(frozen=True)
class OUParams:
    A: np.ndarray
    mu: np.ndarray
    D_c: float = 0.5
    bounds: Tuple[float, float] = (-5.0, 5.0)
    s: float = INITIAL_VARIANCE
    t_final: float = 5.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if mu.shape != (A.shape[0],):
            raise ValueError(f"mu has shape {mu.shape}, expected ({A.shape[0]},)")
        if np.linalg.matrix_rank(A) < A.shape[0]:
            raise ValueError("A must be invertible")
        if not self.s > 0:
            raise ValueError(f"Initial variance must be positive, got {self.s}")
        A.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'mu', mu)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def domain(self) -> Tuple[Tuple[float, float], ...]:
        return (tuple(self.bounds),) * self.dim


@dataclass(frozen=True)
class DumbbellParams:
    alpha: float = 0.1
    beta: float = 1.0
    p: float = 0.5
    D_c: float = 0.5
    bounds: Tuple[float, float] = (-10.0, 10.0)
    t_final: float = 10.0
    s: float = INITIAL_VARIANCE

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")

    @property
    def domain(self) -> Tuple[Tuple[float, float], ...]:
        return (tuple(self.bounds),) * 3


def oup_params(d: int, **overrides) -> OUParams:
    """Benchmark OU parameters for d in {1, 3, 5}"""
    if d not in OU_MATRICES:
        raise ValueError(f"No OU benchmark in {d} dimensions (choose from {sorted(OU_MATRICES)})")
    defaults = PROBLEM_DEFAULTS[f'oup{d}d']
    kwargs = dict(A=OU_MATRICES[d], mu=np.zeros(d), bounds=defaults['bounds'],
                  t_final=defaults['t_final'])
    kwargs.update(overrides)
    return OUParams(**kwargs)


def gaussian_ic(s: float, d: int) -> Callable[[np.ndarray], np.ndarray]:
    """Centered isotropic Gaussian density with variance s"""
    if not s > 0:
        raise ValueError(f"Variance must be positive, got {s}")
    norm = (2.0 * np.pi * s) ** (-d / 2.0)

    def rho0(X):
        X = np.atleast_2d(X)
        return norm * np.exp(-np.sum(X ** 2, axis=1) / (2.0 * s))

    return rho0


# ===== ORNSTEIN-UHLENBECK =====

def ou_drift(params: OUParams):
    A, mu = params.A, params.mu
    return lambda X, t: (mu - np.atleast_2d(X)) @ A.T


def ou_div_terms(params: OUParams):
    trace = float(np.trace(params.A))
    return lambda X, t: np.full(np.atleast_2d(X).shape[0], -trace)


def ou_sigma_1d(t: float, A: float, D_c: float = 0.5) -> float:
    return (1.0 - np.exp(-2.0 * A * t)) * 2.0 * D_c / (2.0 * A)


def ou_analytic_1d(params: OUParams):
    """Density at time t of the 1-D process started from the Gaussian initial condition"""
    if params.dim != 1:
        raise ValueError(f"Analytic solution is one-dimensional, params are {params.dim}-D")
    a = float(params.A[0, 0])
    mu = float(params.mu[0])

    def density(x, t):
        x = np.asarray(x, dtype=float).reshape(-1)
        var = ou_sigma_1d(t, a, params.D_c) + params.s * np.exp(-2.0 * a * t)
        mean = (1.0 - np.exp(-a * t)) * mu
        return np.exp(-(x - mean) ** 2 / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)

    return density


def lyapunov_solve(A: np.ndarray, D_c: float) -> np.ndarray:
    """Solve A W + W A^T = 2 D_c I through the Kronecker-vectorized system"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = A.shape[0]
    eye = np.eye(d)
    K = np.kron(A, eye) + np.kron(eye, A)
    try:
        w = np.linalg.solve(K, (2.0 * D_c * eye).reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise ValueError("Lyapunov system is singular") from exc
    W = w.reshape(d, d)
    return 0.5 * (W + W.T)


def _gaussian_density(X: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Covariance matrix is not positive definite") from exc
    diff = np.atleast_2d(X) - mean
    z = scipy.linalg.solve_triangular(L, diff.T, lower=True)
    log_det = 2.0 * np.sum(np.log(np.diag(L)))
    d = cov.shape[0]
    return np.exp(-0.5 * np.sum(z ** 2, axis=0) - 0.5 * (d * np.log(2.0 * np.pi) + log_det))


def ou_stationary(params: OUParams):
    W = lyapunov_solve(params.A, params.D_c)
    mu = params.mu
    # raises early when W is not positive definite
    _gaussian_density(mu[None, :], mu, W)
    return lambda X: _gaussian_density(X, mu, W)


def ou_mean(t: float, x0, params: OUParams) -> np.ndarray:
    E = scipy.linalg.expm(-params.A * t)
    return E @ np.asarray(x0, dtype=float) + (np.eye(params.dim) - E) @ params.mu


def ou_covariance_quad(t: float, params: OUParams) -> np.ndarray:
    """Covariance at time t by adaptive quadrature of the noise integral"""
    d = params.dim
    if t == 0:
        return np.zeros((d, d))
    SS = 2.0 * params.D_c * np.eye(d)

    def integrand(s):
        E = scipy.linalg.expm(params.A * (s - t))
        return E @ SS @ E.T

    cov, _ = scipy.integrate.quad_vec(integrand, 0.0, t, epsabs=1e-13, epsrel=1e-11)
    return 0.5 * (cov + cov.T)


def ou_transition(params: OUParams):
    """Transitional density rho(x, t | x0) for t > 0"""
    def density(X, t, x0):
        if not t > 0:
            raise ValueError(f"Transitional density needs t > 0, got {t}")
        return _gaussian_density(X, ou_mean(t, x0, params), ou_covariance_quad(t, params))

    return density


def ou_problem(params: OUParams, name: str = "oup") -> ProblemDef:
    return ProblemDef(
        dim=params.dim,
        drift=ou_drift(params),
        drift_div_terms=ou_div_terms(params),
        rho0=gaussian_ic(params.s, params.dim),
        diffusion=params.D_c,
        domain=params.domain,
        horizon=params.t_final,
        name=name,
    )


# ===== DUMBBELL =====

def _spring_factor(params: DumbbellParams, X: np.ndarray) -> np.ndarray:
    return np.exp(-np.sum(X ** 2, axis=1) / (2.0 * params.p ** 2))


def dumbbell_drift(params: DumbbellParams):
    c = params.alpha / (2.0 * params.p ** 5)

    def drift(X, t):
        X = np.atleast_2d(X)
        e = _spring_factor(params, X)
        F = (-0.5 + c * e)[:, None] * X
        F[:, 0] += params.beta * X[:, 1]
        return F

    return drift


def dumbbell_div_terms(params: DumbbellParams):
    c = params.alpha / (2.0 * params.p ** 5)
    c2 = params.alpha / (2.0 * params.p ** 7)

    def div(X, t):
        X = np.atleast_2d(X)
        e = _spring_factor(params, X)
        return 3.0 * (-0.5 + c * e) - c2 * e * np.sum(X ** 2, axis=1)

    return div


def phi_gradient(params: DumbbellParams, X: np.ndarray) -> np.ndarray:
    """Gradient of the spring potential at P x 3 points"""
    X = np.atleast_2d(X)
    e = _spring_factor(params, X)
    return X * (1.0 - params.alpha / params.p ** 5 * e)[:, None]


def dumbbell_problem(params: Optional[DumbbellParams] = None) -> ProblemDef:
    params = params or DumbbellParams()
    return ProblemDef(
        dim=3,
        drift=dumbbell_drift(params),
        drift_div_terms=dumbbell_div_terms(params),
        rho0=gaussian_ic(params.s, 3),
        diffusion=params.D_c,
        domain=params.domain,
        horizon=params.t_final,
        name="dumbbell",
    )


def kramer_tensor(rho: TTTensor, grid: ChebGrid, weight: Callable[[np.ndarray], np.ndarray],
                  eps: float = KRAMER_EPS, seed=DEFAULT_SEED,
                  info: Optional[CrossInfo] = None) -> TTTensor:
    """Nodal values rho * weight(x), rebuilt by cross starting from rounded rho"""
    rho = tt_round(rho, eps)

    def oracle(idx):
        return tt_elements(rho, idx) * weight(grid.points(idx))

    cfg = CrossConfig(eps_ca=eps, kick_rank=KRAMER_KICK_RANK, seed=seed)
    return tt_round(cross_approximate(oracle, rho, cfg, info), eps)


def kramer_observables(rho: TTTensor, grid: ChebGrid, params: DumbbellParams,
                       eps: float = KRAMER_EPS, seed=DEFAULT_SEED) -> Tuple[float, float]:
    """Normalized Kramer stress components (psi, eta) of a nodal density"""
    beta = params.beta

    def psi_weight(X):
        g = phi_gradient(params, X)
        return (X[:, 0] * g[:, 0] - X[:, 1] * g[:, 1]) / beta ** 2

    def eta_weight(X):
        g = phi_gradient(params, X)
        return X[:, 0] * g[:, 1] / beta

    psi = tt_integrate(kramer_tensor(rho, grid, psi_weight, eps, seed), grid)
    eta = tt_integrate(kramer_tensor(rho, grid, eta_weight, eps, seed), grid)
    return psi, eta


def kramer_observer(params: DumbbellParams, eps: float = KRAMER_EPS) -> Observer:
    def observe(state: TTTensor, t: float, stepper: Stepper) -> Dict[str, float]:
        psi, eta = kramer_observables(state, stepper.grid, params, eps)
        return {'psi': psi, 'eta': eta}

    return observe


# ===== BENCHMARK REGISTRY =====

def benchmark(name: str, t_final: Optional[float] = None) -> Tuple[ProblemDef, List[Observer]]:
    """Problem definition and report observers of a named benchmark"""
    if name not in PROBLEM_DEFAULTS:
        raise ValueError(f"Unknown problem '{name}' (choose from {', '.join(PROBLEM_DEFAULTS)})")
    horizon = t_final if t_final is not None else PROBLEM_DEFAULTS[name]['t_final']

    if name == 'dumbbell':
        params = DumbbellParams(t_final=horizon)
        return dumbbell_problem(params), [kramer_observer(params)]

    params = oup_params(PROBLEM_DEFAULTS[name]['dim'], t_final=horizon)
    stationary = ou_stationary(params)
    observers = []
    if params.dim == 1:
        observers.append(error_observer('err_analytic', ou_analytic_1d(params)))
    observers.append(error_observer('err_stationary', lambda X, t: stationary(X), stationary=True))
    return ou_problem(params, name), observers
