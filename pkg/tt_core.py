"""
Tensor-train (TT) format: construction, compression, rounding and
Kronecker-factored operator application.

A d-dimensional tensor is stored as a chain of three-way cores
G_k of shape (R_{k-1}, N_k, R_k) with R_0 = R_d = 1. Multi-indices at the
public boundary (tt_element, tt_elements) are 1-based; the dense layout of
FullTensor is row-major, i.e. the last mode runs fastest.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from config import DENSE_SIZE_LIMIT, MIN_SCAN_CHUNK

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FullTensor:
    """Dense tensor in big-endian (row-major) linearization"""
    data: np.ndarray

    @property
    def mode_sizes(self) -> List[int]:
        return list(self.data.shape)

    def vec(self) -> np.ndarray:
        """Long vector with the last index running fastest"""
        return self.data.reshape(-1)


class TTTensor:
    """
    Immutable tensor train.

    Args:
        cores: sequence of 3-way arrays (R_{k-1}, N_k, R_k)
        copy: copy the arrays before freezing them
    """

    def __init__(self, cores: Sequence[np.ndarray], copy: bool = True):
        if len(cores) == 0:
            raise ValueError("TT-tensor needs at least one core")

        frozen = []
        prev_rank = 1
        for k, core in enumerate(cores):
            core = np.array(core, dtype=float) if copy else np.asarray(core, dtype=float)
            if core.ndim != 3:
                raise ValueError(f"Core {k} has {core.ndim} axes, expected 3")
            if core.shape[0] != prev_rank:
                raise ValueError(
                    f"Core {k} left rank {core.shape[0]} does not match "
                    f"previous right rank {prev_rank}"
                )
            if core.shape[1] < 1:
                raise ValueError(f"Core {k} has empty mode")
            core.setflags(write=False)
            frozen.append(core)
            prev_rank = core.shape[2]

        if frozen[0].shape[0] != 1 or frozen[-1].shape[2] != 1:
            raise ValueError("Boundary ranks must be R_0 = R_d = 1")

        self._cores: Tuple[np.ndarray, ...] = tuple(frozen)

    @property
    def cores(self) -> Tuple[np.ndarray, ...]:
        return self._cores

    @property
    def d(self) -> int:
        return len(self._cores)

    @property
    def mode_sizes(self) -> List[int]:
        return [core.shape[1] for core in self._cores]

    @property
    def ranks(self) -> List[int]:
        return [1] + [core.shape[2] for core in self._cores]

    @property
    def num_params(self) -> int:
        return int(sum(core.size for core in self._cores))

    def __len__(self) -> int:
        return self.d

    def __repr__(self) -> str:
        return f"TTTensor(mode_sizes={self.mode_sizes}, ranks={self.ranks})"

    def __add__(self, other: "TTTensor") -> "TTTensor":
        return tt_add(self, other)

    def __sub__(self, other: "TTTensor") -> "TTTensor":
        return tt_add(self, tt_scale(other, -1.0))

    def __mul__(self, alpha: float) -> "TTTensor":
        return tt_scale(self, alpha)

    __rmul__ = __mul__

    def __neg__(self) -> "TTTensor":
        return tt_scale(self, -1.0)


TensorLike = Union[FullTensor, np.ndarray]


def _truncation_rank(s: np.ndarray, delta: float) -> int:
    """Smallest rank r >= 1 with norm(s[r:]) <= delta"""
    if s.size == 0:
        return 1
    tails = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]
    tails = np.append(tails, 0.0)
    rank = int(np.nonzero(tails <= delta)[0][0])
    return max(rank, 1)


def _check_eps(eps: float):
    if not eps > 0:
        raise ValueError(f"Relative tolerance must be positive, got {eps}")


def tt_from_full(t: TensorLike, eps: float) -> TTTensor:
    """
    TT-SVD compression of a dense tensor.

    The error budget eps*||t||_F is split evenly over the d-1 unfoldings,
    so each truncated SVD may discard eps/sqrt(d-1) of the norm.
    """
    _check_eps(eps)
    data = t.data if isinstance(t, FullTensor) else np.asarray(t, dtype=float)
    if data.ndim == 0:
        raise ValueError("Cannot compress a 0-dimensional tensor")
    if not np.all(np.isfinite(data)):
        raise ValueError("Tensor contains nonfinite entries")

    sizes = data.shape
    d = len(sizes)
    if d == 1:
        return TTTensor([data.reshape(1, -1, 1)])

    delta = eps / np.sqrt(d - 1) * np.linalg.norm(data)

    cores = []
    rank = 1
    rest = data.astype(float)
    for k in range(d - 1):
        rest = rest.reshape(rank * sizes[k], -1)
        u, s, vt = np.linalg.svd(rest, full_matrices=False)
        new_rank = _truncation_rank(s, delta)
        cores.append(u[:, :new_rank].reshape(rank, sizes[k], new_rank))
        rest = s[:new_rank, None] * vt[:new_rank]
        rank = new_rank
    cores.append(rest.reshape(rank, sizes[-1], 1))

    return TTTensor(cores, copy=False)


def tt_to_full(t: TTTensor, limit: int = DENSE_SIZE_LIMIT) -> FullTensor:
    """Dense tensor from the TT-cores (product form)"""
    size = int(np.prod(t.mode_sizes, dtype=np.float64))
    if size > limit:
        raise ValueError(
            f"Dense tensor of shape {t.mode_sizes} has {size} entries, "
            f"limit is {limit}"
        )

    res = t.cores[0].reshape(t.mode_sizes[0], -1)
    for core in t.cores[1:]:
        res = res @ core.reshape(core.shape[0], -1)
        res = res.reshape(-1, core.shape[2])
    return FullTensor(res.reshape(t.mode_sizes))


def _check_index(t: TTTensor, idx: np.ndarray):
    sizes = np.asarray(t.mode_sizes)
    if idx.shape[-1] != t.d:
        raise IndexError(f"Multi-index has {idx.shape[-1]} entries, tensor has {t.d} modes")
    if np.any(idx < 1) or np.any(idx > sizes):
        raise IndexError(f"Multi-index out of range 1..{list(sizes)}")


def tt_element(t: TTTensor, idx: Sequence[int]) -> float:
    """Entry (n_1, ..., n_d), 1-based, as G_1(n_1) G_2(n_2) ... G_d(n_d)"""
    idx = np.asarray(idx, dtype=int)
    _check_index(t, idx)
    res = np.ones((1, 1))
    for core, n in zip(t.cores, idx):
        res = res @ core[:, n - 1, :]
    return float(res[0, 0])


def tt_elements(t: TTTensor, idx: np.ndarray) -> np.ndarray:
    """Batch of entries for an I x d matrix of 1-based multi-indices"""
    idx = np.atleast_2d(np.asarray(idx, dtype=int))
    _check_index(t, idx)
    res = np.ones((idx.shape[0], 1))
    for k, core in enumerate(t.cores):
        # (I, r) x (I, r, r') -> (I, r')
        res = np.einsum('ij,ijk->ik', res, core[:, idx[:, k] - 1, :].transpose(1, 0, 2))
    return res[:, 0]


def _orthogonalize_right(cores: List[np.ndarray]) -> List[np.ndarray]:
    """Right-to-left QR sweep; cores 1..d-1 become right-orthonormal"""
    cores = list(cores)
    for k in range(len(cores) - 1, 0, -1):
        r1, n, r2 = cores[k].shape
        q, r = np.linalg.qr(cores[k].reshape(r1, n * r2).T)
        cores[k] = q.T.reshape(-1, n, r2)
        cores[k - 1] = np.einsum('inj,kj->ink', cores[k - 1], r)
    return cores


def tt_round(t: TTTensor, eps: float) -> TTTensor:
    """
    Recompress to relative accuracy eps: right-to-left orthogonalization,
    then a left-to-right truncated SVD sweep. Ranks never grow.
    """
    _check_eps(eps)
    if t.d == 1:
        return t

    cores = _orthogonalize_right(t.cores)
    norm = np.linalg.norm(cores[0])
    delta = eps / np.sqrt(t.d - 1) * norm

    for k in range(t.d - 1):
        r1, n, r2 = cores[k].shape
        u, s, vt = np.linalg.svd(cores[k].reshape(r1 * n, r2), full_matrices=False)
        rank = _truncation_rank(s, delta)
        cores[k] = u[:, :rank].reshape(r1, n, rank)
        cores[k + 1] = np.einsum('ij,jnk->ink', s[:rank, None] * vt[:rank], cores[k + 1])

    return TTTensor(cores, copy=False)


def tt_rank1(vectors: Sequence[np.ndarray]) -> TTTensor:
    """Rank-1 tensor v_1 x v_2 x ... x v_d"""
    return TTTensor([np.asarray(v, dtype=float).reshape(1, -1, 1) for v in vectors])


def tt_rank1_random(mode_sizes: Sequence[int], seed) -> TTTensor:
    """Random rank-1 tensor with factors drawn uniformly from (0, 1)"""
    if any(n < 1 for n in mode_sizes):
        raise ValueError(f"Mode sizes must be positive, got {list(mode_sizes)}")
    rng = np.random.default_rng(seed)
    return tt_rank1([1.0 - rng.random(n) for n in mode_sizes])


def tt_apply_mode_matrices(t: TTTensor, mats: Sequence[np.ndarray]) -> TTTensor:
    """(M_1 x M_2 x ... x M_d) vec(t), one contraction per core"""
    if len(mats) != t.d:
        raise ValueError(f"Got {len(mats)} matrices for {t.d} modes")
    cores = []
    for k, (mat, core) in enumerate(zip(mats, t.cores)):
        mat = np.asarray(mat, dtype=float)
        n = core.shape[1]
        if mat.shape != (n, n):
            raise ValueError(f"Matrix {k} has shape {mat.shape}, expected {(n, n)}")
        cores.append(np.einsum('ij,sjq->siq', mat, core))
    return TTTensor(cores, copy=False)


def tt_add(a: TTTensor, b: TTTensor) -> TTTensor:
    """Sum of two TT-tensors; ranks add up (round afterwards)"""
    if a.mode_sizes != b.mode_sizes:
        raise ValueError(f"Mode sizes differ: {a.mode_sizes} vs {b.mode_sizes}")
    if a.d == 1:
        return TTTensor([a.cores[0] + b.cores[0]], copy=False)

    cores = []
    for k, (ga, gb) in enumerate(zip(a.cores, b.cores)):
        if k == 0:
            core = np.concatenate([ga, gb], axis=2)
        elif k == a.d - 1:
            core = np.concatenate([ga, gb], axis=0)
        else:
            ra1, n, ra2 = ga.shape
            rb1, _, rb2 = gb.shape
            core = np.zeros((ra1 + rb1, n, ra2 + rb2))
            core[:ra1, :, :ra2] = ga
            core[ra1:, :, ra2:] = gb
        cores.append(core)
    return TTTensor(cores, copy=False)


def tt_scale(t: TTTensor, alpha: float) -> TTTensor:
    cores = list(t.cores)
    cores[0] = alpha * cores[0]
    return TTTensor(cores, copy=False)


def tt_dot(a: TTTensor, b: TTTensor) -> float:
    """Inner product <a, b> of two TT-tensors with equal mode sizes"""
    if a.mode_sizes != b.mode_sizes:
        raise ValueError(f"Mode sizes differ: {a.mode_sizes} vs {b.mode_sizes}")
    res = np.ones((1, 1))
    for ga, gb in zip(a.cores, b.cores):
        res = np.einsum('ij,inp,jnq->pq', res, ga, gb)
    return float(res[0, 0])


def tt_norm(t: TTTensor) -> float:
    """Frobenius norm via a left-to-right QR sweep (no densification)"""
    r = np.ones((1, 1))
    for core in t.cores:
        mat = np.einsum('ij,jnk->ink', r, core).reshape(-1, core.shape[2])
        r = np.linalg.qr(mat, mode='r')
    return float(np.linalg.norm(r))


def tt_erank(t: TTTensor) -> float:
    """
    Effective rank: the uniform rank r whose storage
    N_1 r + (N_2 + ... + N_{d-1}) r^2 + N_d r equals the actual core storage.
    """
    if t.d == 1:
        return 1.0
    sizes = t.mode_sizes
    a = float(sum(sizes[1:-1]))
    b = float(sizes[0] + sizes[-1])
    c = float(t.num_params)
    if a == 0:
        return c / b
    return (-b + np.sqrt(b * b + 4.0 * a * c)) / (2.0 * a)


def tt_min(t: TTTensor, chunk: int = MIN_SCAN_CHUNK) -> float:
    """
    Exact minimum entry. Tensors above `chunk` entries are scanned slice by
    slice along the leading mode, so at most `chunk` entries are dense at once.
    """
    cores = list(t.cores)
    size = int(np.prod(t.mode_sizes, dtype=np.float64))
    if size <= chunk or t.d == 1:
        return float(tt_to_full(TTTensor(cores, copy=False), limit=max(size, 1)).data.min())

    head, nxt = cores[0], cores[1]
    best = np.inf
    for n in range(head.shape[1]):
        merged = np.einsum('ij,jmk->imk', head[:, n, :], nxt)
        sub = TTTensor([merged] + cores[2:], copy=False)
        best = min(best, tt_min(sub, chunk))
    return float(best)
