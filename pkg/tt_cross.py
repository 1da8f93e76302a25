"""
Rank-adaptive TT cross approximation.

The tensor is rebuilt from oracle evaluations on fibers through the
current left (row) and right (column) index sets. Each bond's fiber
matrix is truncated by SVD, enriched with a few random directions and
pivoted by maxvol; the pivots become the next index sets.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg

from config import CROSS_DEFAULTS, DEFAULT_SEED, MAXVOL_MAX_ITERS
from tt_core import TTTensor, _truncation_rank, tt_add, tt_norm, tt_scale

logger = logging.getLogger(__name__)

# I x d integer matrix of 1-based multi-indices
IndexBatch = np.ndarray
Oracle = Callable[[IndexBatch], np.ndarray]


class CrossError(ValueError):
    """Oracle returned a nonfinite value"""

    def __init__(self, message: str, index):
        super().__init__(message)
        self.index = tuple(int(i) for i in index)


@dataclass
class CrossConfig:
    eps_ca: float
    max_sweeps: int = CROSS_DEFAULTS['max_sweeps']
    kick_rank: int = CROSS_DEFAULTS['kick_rank']
    maxvol_delta: float = CROSS_DEFAULTS['maxvol_delta']
    seed: Optional[int] = DEFAULT_SEED
    max_rank: int = CROSS_DEFAULTS['max_rank']

    def __post_init__(self):
        if not self.eps_ca > 0:
            raise ValueError(f"eps_ca must be positive, got {self.eps_ca}")
        if self.kick_rank < 1:
            raise ValueError(f"kick_rank must be at least 1, got {self.kick_rank}")
        if self.maxvol_delta < 0:
            raise ValueError(f"maxvol_delta must be nonnegative, got {self.maxvol_delta}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be at least 1, got {self.max_sweeps}")
        if self.max_rank < 1:
            raise ValueError(f"max_rank must be at least 1, got {self.max_rank}")


@dataclass
class CrossInfo:
    """Diagnostics of the last cross_approximate call"""
    converged: bool = False
    sweeps: int = 0
    evaluations: int = 0
    rel_change: float = np.inf
    ranks: List[int] = field(default_factory=list)


def _maxvol_seed(m: np.ndarray) -> np.ndarray:
    r = m.shape[1]
    P, _, _ = scipy.linalg.lu(m)
    idx = np.argmax(P[:, :r], axis=0)
    if np.linalg.matrix_rank(m[idx]) == r:
        return idx
    _, _, piv = scipy.linalg.qr(m.T, mode='economic', pivoting=True)
    idx = piv[:r]
    if np.linalg.matrix_rank(m[idx]) < r:
        raise ValueError("maxvol: matrix is rank-deficient")
    return idx


def maxvol(m: np.ndarray, delta: float = CROSS_DEFAULTS['maxvol_delta']) -> np.ndarray:
    """
    Rows of a tall n x r matrix spanning a dominant r x r submatrix.

    Returns 0-based row indices I such that every entry of m @ inv(m[I])
    is at most 1 + delta in absolute value (up to the iteration cap).
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"maxvol expects a matrix, got shape {m.shape}")
    n, r = m.shape
    if n < r:
        raise ValueError(f"maxvol needs a tall matrix, got {n} x {r}")
    if r == 0:
        return np.zeros(0, dtype=int)
    if not np.all(np.isfinite(m)):
        raise ValueError("maxvol: matrix has nonfinite entries")

    idx = _maxvol_seed(m).copy()
    B = np.linalg.solve(m[idx].T, m.T).T

    for _ in range(MAXVOL_MAX_ITERS):
        i, j = np.unravel_index(np.argmax(np.abs(B)), B.shape)
        if abs(B[i, j]) <= 1.0 + delta:
            break
        idx[j] = i
        row = B[i, :].copy()
        row[j] -= 1.0
        col = B[:, j].copy()
        B -= np.outer(col, row) / col[i]

    worst = np.max(np.abs(np.linalg.solve(m[idx].T, m.T)))
    if worst > 1.0 + delta + 1e-8:
        logger.warning("maxvol stopped after %d swaps, max |coefficient| = %.4f", MAXVOL_MAX_ITERS, worst)
    return idx


def _fiber_indices(left: np.ndarray, n: int, right: np.ndarray) -> np.ndarray:
    """0-based multi-indices of all (left, j, right) triples, right index fastest"""
    r1, r2 = left.shape[0], right.shape[0]
    return np.hstack([
        np.repeat(left, n * r2, axis=0),
        np.tile(np.repeat(np.arange(n), r2), r1)[:, None],
        np.tile(right, (r1 * n, 1)),
    ])


class _Sampler:
    """Counts evaluations and validates oracle output"""

    def __init__(self, evaluate: Oracle, d: int):
        self.evaluate = evaluate
        self.d = d
        self.count = 0

    def __call__(self, idx0: np.ndarray) -> np.ndarray:
        idx = idx0 + 1
        values = np.asarray(self.evaluate(idx), dtype=float).reshape(-1)
        if values.shape[0] != idx.shape[0]:
            raise ValueError(f"Oracle returned {values.shape[0]} values for {idx.shape[0]} indices")
        bad = ~np.isfinite(values)
        if np.any(bad):
            where = idx[np.argmax(bad)]
            raise CrossError(f"Oracle returned a nonfinite value at index {tuple(where)}", where)
        self.count += idx.shape[0]
        return values

    def fibers(self, left: np.ndarray, n: int, right: np.ndarray) -> np.ndarray:
        values = self(_fiber_indices(left, n, right))
        return values.reshape(left.shape[0], n, right.shape[0])


def _pivot_basis(mat: np.ndarray, cfg: CrossConfig, delta: float, rng: np.random.Generator):
    """Truncated and enriched column basis of `mat` with its maxvol rows"""
    rows = mat.shape[0]
    U, s, _ = np.linalg.svd(mat, full_matrices=False)
    rank = min(_truncation_rank(s, delta * np.linalg.norm(s)), cfg.max_rank, rows)
    U = U[:, :rank]
    kick = min(cfg.kick_rank, rows - rank)
    if kick > 0:
        U = np.hstack([U, rng.standard_normal((rows, kick))])
    Q, _ = np.linalg.qr(U)
    ind = maxvol(Q, cfg.maxvol_delta)
    return Q @ np.linalg.inv(Q[ind]), ind


def _initial_right_sets(guess: TTTensor, cfg: CrossConfig) -> List[np.ndarray]:
    d = guess.d
    cols = [np.zeros((1, 0), dtype=int) for _ in range(d + 1)]
    cores = list(guess.cores)
    for i in range(d - 1, 0, -1):
        r1, n, r2 = cores[i].shape
        Q, R = np.linalg.qr(cores[i].reshape(r1, n * r2).T)
        ind = maxvol(Q, cfg.maxvol_delta)
        cols[i] = np.hstack([(ind // r2)[:, None], cols[i + 1][ind % r2]])
        cores[i - 1] = np.einsum('inj,jk->ink', cores[i - 1], R.T)
        cores[i] = Q.T.reshape(-1, n, r2)
    return cols


def _sweep_left_to_right(sample: _Sampler, rows, cols, sizes, cfg, delta, rng) -> TTTensor:
    d = len(sizes)
    cores = []
    for i in range(d - 1):
        fib = sample.fibers(rows[i], sizes[i], cols[i + 1])
        r1, n, r2 = fib.shape
        core, ind = _pivot_basis(fib.reshape(r1 * n, r2), cfg, delta, rng)
        rows[i + 1] = np.hstack([rows[i][ind // n], (ind % n)[:, None]])
        cores.append(core.reshape(r1, n, -1))
    cores.append(sample.fibers(rows[d - 1], sizes[d - 1], cols[d]))
    return TTTensor(cores, copy=False)


def _sweep_right_to_left(sample: _Sampler, rows, cols, sizes, cfg, delta, rng) -> TTTensor:
    d = len(sizes)
    cores = [None] * d
    for i in range(d - 1, 0, -1):
        fib = sample.fibers(rows[i], sizes[i], cols[i + 1])
        r1, n, r2 = fib.shape
        core, ind = _pivot_basis(fib.reshape(r1, n * r2).T, cfg, delta, rng)
        cols[i] = np.hstack([(ind // r2)[:, None], cols[i + 1][ind % r2]])
        cores[i] = core.T.reshape(-1, n, r2)
    cores[0] = sample.fibers(rows[0], sizes[0], cols[1])
    return TTTensor(cores, copy=False)


def cross_approximate(evaluate: Oracle, guess: TTTensor, cfg: CrossConfig,
                      info: Optional[CrossInfo] = None) -> TTTensor:
    """
    Rebuild a TT-tensor with the guess's mode sizes from a batched oracle.

    `evaluate` receives an I x d matrix of 1-based multi-indices and returns
    I values. Sweeps alternate direction until the relative Frobenius change
    between successive iterates is at most cfg.eps_ca, or cfg.max_sweeps
    passes are done; then the last iterate is returned with
    info.converged = False. An iterate whose norm overflows raises ValueError.
    """
    info = info if info is not None else CrossInfo()
    sizes = guess.mode_sizes
    d = guess.d
    sample = _Sampler(evaluate, d)

    if d == 1:
        values = sample(np.arange(sizes[0])[:, None])
        result = TTTensor([values.reshape(1, -1, 1)], copy=False)
        info.converged, info.sweeps, info.rel_change = True, 1, 0.0
        info.evaluations, info.ranks = sample.count, result.ranks
        return result

    rng = np.random.default_rng(cfg.seed)
    delta = cfg.eps_ca / np.sqrt(d)
    rows = [np.zeros((1, 0), dtype=int) for _ in range(d + 1)]
    cols = _initial_right_sets(guess, cfg)

    prev = None
    result = None
    change = np.inf
    converged = False
    for sweep in range(1, cfg.max_sweeps + 1):
        if sweep % 2 == 1:
            result = _sweep_left_to_right(sample, rows, cols, sizes, cfg, delta, rng)
        else:
            result = _sweep_right_to_left(sample, rows, cols, sizes, cfg, delta, rng)

        if prev is not None:
            diff = tt_norm(tt_add(result, tt_scale(prev, -1.0)))
            scale = tt_norm(result)
            if not (np.isfinite(diff) and np.isfinite(scale)):
                raise ValueError(f"Cross iterate of sweep {sweep} has a nonfinite norm "
                                 f"(change {diff}, norm {scale})")
            change = diff / scale if scale > 0 else diff
            logger.debug("cross sweep %d: ranks %s, change %.3e, evaluations %d",
                         sweep, result.ranks, change, sample.count)
            if change <= cfg.eps_ca:
                converged = True
                break
        prev = result

    if not converged:
        logger.warning("Cross approximation did not converge in %d sweeps (relative change %.3e > %.1e)",
                       cfg.max_sweeps, change, cfg.eps_ca)

    info.converged = converged
    info.sweeps = sweep
    info.evaluations = sample.count
    info.rel_change = float(change)
    info.ranks = result.ranks
    return result


def cross_on_cheb_grid(point_func: Callable[[np.ndarray], np.ndarray], grid, guess: TTTensor,
                       cfg: CrossConfig, info: Optional[CrossInfo] = None) -> TTTensor:
    """Nodal TT-tensor of a P x d point function sampled on a ChebGrid"""
    if guess.mode_sizes != list(grid.sizes):
        raise ValueError(f"Guess modes {guess.mode_sizes} do not match grid {list(grid.sizes)}")
    return cross_approximate(lambda idx: point_func(grid.points(idx)), guess, cfg, info)
