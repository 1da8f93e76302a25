"""
Chebyshev machinery on tensor-product grids: nodes, spectral
differentiation, interpolation coefficients in TT-format, interpolant
evaluation and Clenshaw-Curtis quadrature.

Every dimension lives on its own box [a_k, b_k]; the reference interval is
[-1, 1] and x = a + (b - a) (xi + 1) / 2.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
import scipy.fft

from tt_core import TTTensor, tt_round

logger = logging.getLogger(__name__)

# Slack for points that sit on the box boundary up to rounding
BOUNDARY_TOL = 1e-10


def _check_size(N: int):
    if N < 2:
        raise ValueError(f"Chebyshev grid needs at least 2 points, got {N}")


def cheb_nodes(N: int, a: float = -1.0, b: float = 1.0) -> np.ndarray:
    """Nodes cos(pi (n-1)/(N-1)), n = 1..N, mapped to [a, b] (decreasing)"""
    _check_size(N)
    if not a < b:
        raise ValueError(f"Empty interval [{a}, {b}]")
    x = np.cos(np.pi * np.arange(N) / (N - 1))
    return a + (b - a) * (x + 1.0) / 2.0


@dataclass(frozen=True)
class ChebGrid:
    """Tensor product of 1-D Chebyshev grids, one box per dimension"""
    sizes: Tuple[int, ...]
    bounds: Tuple[Tuple[float, float], ...]
    nodes: Tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        if len(sizes) != len(bounds):
            raise ValueError(f"{len(sizes)} sizes but {len(bounds)} bounds")
        if len(sizes) == 0:
            raise ValueError("Grid needs at least one dimension")
        nodes = tuple(cheb_nodes(n, a, b) for n, (a, b) in zip(sizes, bounds))
        object.__setattr__(self, 'sizes', sizes)
        object.__setattr__(self, 'bounds', bounds)
        object.__setattr__(self, 'nodes', nodes)

    @classmethod
    def uniform(cls, dims: int, N: int, a: float, b: float) -> "ChebGrid":
        return cls((N,) * dims, ((a, b),) * dims)

    @property
    def dims(self) -> int:
        return len(self.sizes)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a for a, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b for _, b in self.bounds])

    def points(self, idx: np.ndarray) -> np.ndarray:
        """Physical coordinates (P x d) of 1-based multi-indices (P x d)"""
        idx = np.atleast_2d(np.asarray(idx, dtype=int))
        return np.column_stack([self.nodes[k][idx[:, k] - 1] for k in range(self.dims)])

    def to_reference(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return 2.0 * (X - self.lower) / (self.upper - self.lower) - 1.0

    def contains(self, X: np.ndarray) -> np.ndarray:
        """Row mask of points inside the closed box"""
        slack = BOUNDARY_TOL * (self.upper - self.lower)
        X = np.atleast_2d(X)
        inside = (X >= self.lower - slack) & (X <= self.upper + slack)
        return np.all(inside, axis=1)

    def clamp(self, X: np.ndarray) -> np.ndarray:
        return np.clip(X, self.lower, self.upper)


def cheb_diff1(N: int, a: float = -1.0, b: float = 1.0) -> np.ndarray:
    """First-order Chebyshev differentiation matrix on [a, b]"""
    _check_size(N)
    theta = np.pi * np.arange(N) / (N - 1)
    x = np.cos(theta)
    c = np.ones(N)
    c[0] = c[-1] = 2.0
    sign = (-1.0) ** np.arange(N)

    # x_i - x_j in product form, free of cancellation near the ends
    dx = 2.0 * np.sin(0.5 * (theta[None, :] + theta[:, None])) * np.sin(0.5 * (theta[None, :] - theta[:, None]))
    np.fill_diagonal(dx, 1.0)
    D = np.outer(c * sign, sign / c) / dx

    inner = np.arange(1, N - 1)
    D[inner, inner] = -x[inner] / (2.0 * np.sin(theta[inner]) ** 2)
    D[0, 0] = (2.0 * (N - 1) ** 2 + 1.0) / 6.0
    D[-1, -1] = -D[0, 0]

    return D * (2.0 / (b - a))


def cheb_diff2(N: int, a: float = -1.0, b: float = 1.0) -> np.ndarray:
    """Second-order matrix D = D1 @ D1 on [a, b]"""
    D1 = cheb_diff1(N, a, b)
    return D1 @ D1


def cheb_poly_eval(n_max: int, x) -> np.ndarray:
    """Values T_0(x) .. T_{n_max}(x); result has shape (n_max + 1, *x.shape)"""
    x = np.asarray(x, dtype=float)
    T = np.empty((n_max + 1,) + x.shape)
    T[0] = 1.0
    if n_max >= 1:
        T[1] = x
    for k in range(1, n_max):
        T[k + 1] = 2.0 * x * T[k] - T[k - 1]
    return T


@dataclass(frozen=True)
class ChebCoeffs:
    """TT-tensor of Chebyshev interpolation coefficients on a grid"""
    tensor: TTTensor
    grid: ChebGrid

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return interp_eval(self, points)


def _coeffs_of_columns(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients of every column of an N x m matrix of nodal values"""
    N = values.shape[0]
    extended = np.vstack([values, values[-2:0:-1]])
    coeffs = np.real(scipy.fft.fft(extended, axis=0))[:N] / (N - 1)
    coeffs[0] /= 2.0
    coeffs[-1] /= 2.0
    return coeffs


def interp_coeffs(nodal: TTTensor, grid: ChebGrid, eps: float) -> ChebCoeffs:
    """Transform nodal values to Chebyshev coefficients core by core, then round"""
    if nodal.mode_sizes != list(grid.sizes):
        raise ValueError(f"Tensor modes {nodal.mode_sizes} do not match grid {list(grid.sizes)}")
    for n in grid.sizes:
        _check_size(n)

    cores = []
    for core in nodal.cores:
        r1, n, r2 = core.shape
        columns = np.swapaxes(core, 0, 1).reshape(n, r1 * r2)
        columns = _coeffs_of_columns(columns)
        cores.append(np.swapaxes(columns.reshape(n, r1, r2), 0, 1))

    tensor = tt_round(TTTensor(cores, copy=False), eps)
    return ChebCoeffs(tensor, grid)


def interp_eval(coeffs: ChebCoeffs, points: np.ndarray) -> np.ndarray:
    """Evaluate the interpolant at P x d physical points (inside the box)"""
    grid = coeffs.grid
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != grid.dims:
        raise ValueError(f"Points have {points.shape[1]} coordinates, grid has {grid.dims}")
    outside = ~grid.contains(points)
    if np.any(outside):
        first = points[np.argmax(outside)]
        raise ValueError(
            f"{int(outside.sum())} point(s) outside the interpolation box, e.g. {first}"
        )

    xi = np.clip(grid.to_reference(points), -1.0, 1.0)
    res = np.ones((points.shape[0], 1))
    for k, core in enumerate(coeffs.tensor.cores):
        T = cheb_poly_eval(core.shape[1] - 1, xi[:, k])          # (n, P)
        tmp = np.einsum('pi,inj->pnj', res, core)                 # (P, n, r2)
        res = np.einsum('pnj,np->pj', tmp, T)
    return res[:, 0]


def cc_weights(N: int, a: float = -1.0, b: float = 1.0) -> np.ndarray:
    """Clenshaw-Curtis weights on the N Chebyshev nodes of [a, b]"""
    _check_size(N)
    n = N - 1
    theta = np.pi * np.arange(N) / n
    w = np.zeros(N)
    inner = theta[1:-1]
    v = np.ones(n - 1)

    if n % 2 == 0:
        w[0] = w[-1] = 1.0 / (n ** 2 - 1)
        k = np.arange(1, n // 2)
        v -= (2.0 * np.cos(2.0 * np.outer(inner, k)) / (4.0 * k ** 2 - 1)).sum(axis=1)
        v -= np.cos(n * inner) / (n ** 2 - 1)
    else:
        w[0] = w[-1] = 1.0 / n ** 2
        k = np.arange(1, (n - 1) // 2 + 1)
        v -= (2.0 * np.cos(2.0 * np.outer(inner, k)) / (4.0 * k ** 2 - 1)).sum(axis=1)

    w[1:-1] = 2.0 * v / n
    return w * (b - a) / 2.0


def tt_integrate(t: TTTensor, grid: ChebGrid) -> float:
    """Tensor-product Clenshaw-Curtis integral of nodal values"""
    if t.mode_sizes != list(grid.sizes):
        raise ValueError(f"Tensor modes {t.mode_sizes} do not match grid {list(grid.sizes)}")
    res = np.ones(1)
    for core, w in zip(t.cores, grid_weights(grid)):
        res = res @ np.einsum('inj,n->ij', core, w)
    return float(res[0])


def grid_weights(grid: ChebGrid) -> List[np.ndarray]:
    return [cc_weights(n, a, b) for n, (a, b) in zip(grid.sizes, grid.bounds)]


def dense_values(func, grid: ChebGrid) -> np.ndarray:
    """Samples of a point function on the whole grid (small grids only)"""
    mesh = np.meshgrid(*grid.nodes, indexing='ij')
    X = np.column_stack([m.reshape(-1) for m in mesh])
    return np.asarray(func(X), dtype=float).reshape(grid.sizes)


__all__: Sequence[str] = [
    'ChebGrid', 'ChebCoeffs', 'cheb_nodes', 'cheb_diff1', 'cheb_diff2',
    'cheb_poly_eval', 'interp_coeffs', 'interp_eval', 'cc_weights',
    'tt_integrate', 'grid_weights', 'dense_values',
]
