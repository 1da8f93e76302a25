"""
Fokker-Planck time stepping in the TT-format.

Each step is a Strang splitting: half a step of diffusion (a Kronecker
product of matrix exponentials, one per dimension), a full convection step
solved along characteristics and rebuilt by cross approximation, and a
second diffusion half-step.

The density is taken to vanish on the boundary of the box: diffusion keeps
the end nodes at zero and mass entering from outside is zero.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from cheb import ChebCoeffs, ChebGrid, cheb_diff2, interp_coeffs, interp_eval, tt_integrate
from config import CSV_COLUMNS, DEFAULT_SEED, REFERENCE_EPS
from tt_core import (TTTensor, tt_apply_mode_matrices, tt_erank, tt_min, tt_norm,
                     tt_rank1_random, tt_round)
from tt_cross import CrossConfig, CrossInfo, cross_on_cheb_grid

logger = logging.getLogger(__name__)

PointMap = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ProblemDef:
    """
    A Fokker-Planck problem d rho/dt = -div(f rho) + D_c Laplace(rho).

    drift(X, t) returns P x d values of f, drift_div_terms(X, t) the P traces
    sum_k df_k/dx_k, rho0(X) the initial density at P x d points.
    """
    dim: int
    drift: PointMap
    drift_div_terms: PointMap
    rho0: Callable[[np.ndarray], np.ndarray]
    diffusion: float
    domain: Tuple[Tuple[float, float], ...]
    horizon: float
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"Problem dimension must be positive, got {self.dim}")
        if len(self.domain) != self.dim:
            raise ValueError(f"{len(self.domain)} domain intervals for a {self.dim}-D problem")
        if self.diffusion < 0:
            raise ValueError(f"Diffusion coefficient must be nonnegative, got {self.diffusion}")
        if not self.horizon > 0:
            raise ValueError(f"Time horizon must be positive, got {self.horizon}")


@dataclass
class Stepper:
    problem: ProblemDef
    grid: ChebGrid
    h: float
    z_mats: List[np.ndarray]
    eps: float
    cross_cfg: CrossConfig
    state: TTTensor
    conv_guess: TTTensor
    last_cross: CrossInfo = field(default_factory=CrossInfo)


@dataclass
class SolveReport:
    """Per-step diagnostics of a solve; one row per completed step"""
    rows: List[Dict[str, float]] = field(default_factory=list)
    non_converged: int = 0

    def append(self, row: Dict[str, float], converged: bool = True):
        self.rows.append(row)
        if not converged:
            self.non_converged += 1

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def last(self) -> Dict[str, float]:
        return self.rows[-1] if self.rows else {}

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows, columns=CSV_COLUMNS, dtype=float)
        frame['step'] = frame['step'].astype(int)
        return frame


class SolverError(RuntimeError):
    """Failure inside solve; `report` holds the steps completed before it"""

    def __init__(self, message: str, report: SolveReport):
        super().__init__(message)
        self.report = report


Observer = Callable[[TTTensor, float, Stepper], Dict[str, float]]


def matrix_exponential(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"Matrix exponential needs a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("Matrix exponential of a matrix with nonfinite entries")
    return scipy.linalg.expm(m)


def tt_from_function(func: Callable[[np.ndarray], np.ndarray], grid: ChebGrid, eps: float,
                     cross_cfg: Optional[CrossConfig] = None, seed=DEFAULT_SEED,
                     info: Optional[CrossInfo] = None) -> TTTensor:
    """Rounded nodal TT-tensor of a point function on the grid"""
    cfg = cross_cfg if cross_cfg is not None else CrossConfig(eps_ca=eps, seed=seed)
    guess = tt_rank1_random(grid.sizes, seed)
    return tt_round(cross_on_cheb_grid(func, grid, guess, cfg, info), eps)


def relative_error(t: TTTensor, reference: TTTensor) -> float:
    """||t - reference||_F / ||reference||_F over grid nodal values"""
    ref_norm = tt_norm(reference)
    diff = tt_norm(t - reference)
    return diff / ref_norm if ref_norm > 0 else diff


def diffusion_matrix(n: int, a: float, b: float, tau: float) -> np.ndarray:
    """
    Propagator exp(tau d^2/dx^2) on the n Chebyshev nodes of [a, b] with the
    density held at zero on both end nodes.

    The exponential acts on the interior block of D2 only, whose eigenvalues
    are real and negative. Boundary rows and columns of the result are zero,
    so whatever sits on the end nodes is dropped.
    """
    if n < 3:
        raise ValueError(f"Diffusion needs at least 3 nodes per dimension, got {n}")
    if tau < 0:
        raise ValueError(f"Diffusion time must be nonnegative, got {tau}")
    z = np.zeros((n, n))
    z[1:-1, 1:-1] = matrix_exponential(tau * cheb_diff2(n, a, b)[1:-1, 1:-1])
    return z


def _check_run(p: ProblemDef, sizes: Sequence[int], M: int, eps: float):
    if M < 2:
        raise ValueError(f"Need at least 2 time points, got {M}")
    if len(sizes) != p.dim:
        raise ValueError(f"{len(sizes)} grid sizes for a {p.dim}-D problem")
    smallest = 3 if p.diffusion > 0 else 2
    if min(sizes) < smallest:
        raise ValueError(f"Every grid size must be at least {smallest}, got {list(sizes)}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")


def build_stepper(p: ProblemDef, sizes: Sequence[int], M: int, eps: float,
                  cross_cfg: Optional[CrossConfig] = None, seed=DEFAULT_SEED) -> Stepper:
    _check_run(p, sizes, M, eps)
    grid = ChebGrid(tuple(sizes), p.domain)
    h = p.horizon / (M - 1)
    cfg = cross_cfg if cross_cfg is not None else CrossConfig(eps_ca=eps, seed=seed)

    rho0 = tt_from_function(p.rho0, grid, eps, cfg, seed)

    z_mats = []
    for n, (a, b) in zip(grid.sizes, grid.bounds):
        if p.diffusion == 0:
            z_mats.append(np.eye(n))
        else:
            z_mats.append(diffusion_matrix(n, a, b, 0.5 * h * p.diffusion))

    logger.info("Stepper for '%s': grid %s, h = %.6g, initial ranks %s",
                p.name, list(grid.sizes), h, rho0.ranks)
    return Stepper(problem=p, grid=grid, h=h, z_mats=z_mats, eps=eps, cross_cfg=cfg,
                   state=rho0, conv_guess=rho0)


def diffusion_half_step(s: Stepper):
    """Apply exp((h/2) D_c Laplace) to the state and round"""
    if s.problem.diffusion == 0:
        return
    s.state = tt_round(tt_apply_mode_matrices(s.state, s.z_mats), s.eps)


def _stage(rhs, y: np.ndarray, t: float) -> np.ndarray:
    k = np.asarray(rhs(y, t), dtype=float)
    if not np.all(np.isfinite(k)):
        bad = int(np.sum(~np.isfinite(k)))
        raise FloatingPointError(f"Right-hand side returned {bad} nonfinite value(s) at t = {t:.6g}")
    return k


def rk4_step(rhs: Callable[[np.ndarray, float], np.ndarray], t1: float, t2: float,
             y0: np.ndarray) -> np.ndarray:
    """
    One classical Runge-Kutta step from t1 to t2 (either order).

    y0 holds one state per row; rhs(Y, t) returns an array of the same shape.
    """
    y0 = np.asarray(y0, dtype=float)
    dt = t2 - t1
    k1 = _stage(rhs, y0, t1)
    k2 = _stage(rhs, y0 + 0.5 * dt * k1, t1 + 0.5 * dt)
    k3 = _stage(rhs, y0 + 0.5 * dt * k2, t1 + 0.5 * dt)
    k4 = _stage(rhs, y0 + dt * k3, t2)
    return y0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def convection_values(X_star: np.ndarray, t: float, h: float, coeffs: ChebCoeffs,
                      p: ProblemDef) -> np.ndarray:
    """
    Density at time t + h at the points X_star after pure convection from t.

    Characteristics are traced back to t, the interpolant is read there, and
    the density is carried forward along the characteristic together with
    the position: dw/dt = -div f * w. Characteristics that start outside
    the box carry zero density.
    """
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    d = p.dim
    grid = coeffs.grid

    X_hat = rk4_step(p.drift, t + h, t, X_star)
    outside = ~grid.contains(X_hat)
    w_hat = interp_eval(coeffs, grid.clamp(X_hat))
    if np.any(outside):
        logger.debug("%d characteristic(s) start outside the box", int(outside.sum()))
        w_hat[outside] = 0.0

    def augmented(Y, s):
        X, w = Y[:, :d], Y[:, d]
        return np.hstack([p.drift(X, s), (-p.drift_div_terms(X, s) * w)[:, None]])

    Y = rk4_step(augmented, t, t + h, np.hstack([X_hat, w_hat[:, None]]))
    return Y[:, d]


def step(s: Stepper, m: int) -> CrossInfo:
    """Advance the state from t_m = m h to t_{m+1}"""
    t = m * s.h
    diffusion_half_step(s)
    coeffs = interp_coeffs(s.state, s.grid, s.eps)

    info = CrossInfo()
    # rounding drops the ranks the cross kicked in
    s.state = tt_round(cross_on_cheb_grid(
        lambda X: convection_values(X, t, s.h, coeffs, s.problem),
        s.grid, s.conv_guess, s.cross_cfg, info,
    ), s.eps)
    s.conv_guess = s.state
    diffusion_half_step(s)
    s.last_cross = info
    return info


def solve(p: ProblemDef, sizes: Sequence[int], M: int, eps: float,
          cross_cfg: Optional[CrossConfig] = None, observers: Sequence[Observer] = (),
          seed=DEFAULT_SEED) -> Tuple[TTTensor, SolveReport]:
    """
    Run M - 1 steps up to the problem horizon.

    After every step the report gets a row with erank, mass and minimum
    nodal value, plus whatever the observers return. Any failure is raised
    as SolverError carrying the rows completed so far.
    """
    _check_run(p, sizes, M, eps)
    report = SolveReport()
    start = time.perf_counter()
    logger.info("Solving '%s': d = %d, N = %s, M = %d, eps = %g", p.name, p.dim, list(sizes), M, eps)

    try:
        stepper = build_stepper(p, sizes, M, eps, cross_cfg, seed)
    except Exception as exc:
        raise SolverError(f"Initial condition failed: {exc}", report) from exc

    for m in range(M - 1):
        try:
            info = step(stepper, m)
            t = (m + 1) * stepper.h
            state = stepper.state
            row = {
                'step': m + 1,
                't': t,
                'erank': tt_erank(state),
                'mass': tt_integrate(state, stepper.grid),
                'min_nodal': tt_min(state),
            }
            for observer in observers:
                row.update(observer(state, t, stepper))
            row['wall_seconds'] = time.perf_counter() - start
        except Exception as exc:
            raise SolverError(f"Step {m + 1} of {M - 1} failed: {exc}", report) from exc

        report.append(row, converged=info.converged)
        logger.debug("step %d: t = %.4f, ranks %s, mass %.8f, %.2fs",
                     m + 1, t, state.ranks, row['mass'], row['wall_seconds'])

    if report.non_converged:
        logger.warning("%d convection step(s) ended without cross convergence", report.non_converged)
    logger.info("Solve finished in %.2fs, final ranks %s", time.perf_counter() - start, stepper.state.ranks)
    return stepper.state, report


def error_observer(column: str, density: Callable[[np.ndarray, float], np.ndarray],
                   stationary: bool = False, eps: float = REFERENCE_EPS) -> Observer:
    """
    Observer writing the relative error against a reference density into
    `column`. A stationary reference is built once and reused.
    """
    cache: Dict[str, TTTensor] = {}

    def observe(state: TTTensor, t: float, stepper: Stepper) -> Dict[str, float]:
        if stationary and 'ref' in cache:
            reference = cache['ref']
        else:
            reference = tt_from_function(lambda X: density(X, t), stepper.grid, eps)
            if stationary:
                cache['ref'] = reference
        return {column: relative_error(state, reference)}

    return observe


def check_drift_divergence(p: ProblemDef, points: np.ndarray, t: float = 0.0,
                           step_size: float = 1e-6) -> float:
    """Largest gap between drift_div_terms and a central-difference divergence"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    fd = np.zeros(points.shape[0])
    for k in range(p.dim):
        shift = np.zeros(p.dim)
        shift[k] = step_size
        fd += (p.drift(points + shift, t)[:, k] - p.drift(points - shift, t)[:, k]) / (2 * step_size)
    return float(np.max(np.abs(fd - p.drift_div_terms(points, t))))
