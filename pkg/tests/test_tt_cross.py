import itertools
import logging

import numpy as np
import pytest

import tt_cross
from cheb import ChebGrid
from tt_core import TTTensor, tt_elements, tt_rank1, tt_rank1_random, tt_round, tt_to_full
from tt_cross import CrossConfig, CrossError, CrossInfo, cross_approximate, cross_on_cheb_grid, maxvol


def dominance(m, idx):
    return np.max(np.abs(m @ np.linalg.inv(m[idx])))


def test_maxvol_small_example():
    m = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    assert sorted(maxvol(m, 0.01)) == [0, 1]


def test_maxvol_identity():
    assert sorted(maxvol(np.eye(4), 0.0)) == [0, 1, 2, 3]


@pytest.mark.parametrize('shape', [(10, 3), (50, 7), (8, 8), (200, 12)])
def test_maxvol_dominance(rng, shape):
    m = rng.standard_normal(shape)
    idx = maxvol(m, 0.01)
    assert len(set(idx)) == shape[1]
    assert dominance(m, idx) <= 1.01 + 1e-10


def test_maxvol_rejects_rank_deficient():
    m = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(ValueError):
        maxvol(m)


def test_maxvol_rejects_wide_matrix():
    with pytest.raises(ValueError):
        maxvol(np.ones((2, 3)))


def test_cross_config_validation():
    with pytest.raises(ValueError):
        CrossConfig(eps_ca=0.0)
    with pytest.raises(ValueError):
        CrossConfig(eps_ca=1e-4, kick_rank=0)
    with pytest.raises(ValueError):
        CrossConfig(eps_ca=1e-4, maxvol_delta=-1.0)


def dense_oracle(data):
    return lambda idx: data[tuple((idx - 1).T)]


def test_separable_oracle(rng):
    a, b, c = 1 + rng.random(8), 1 + rng.random(9), 1 + rng.random(7)
    data = np.einsum('i,j,k->ijk', a, b, c)
    info = CrossInfo()
    t = cross_approximate(dense_oracle(data), tt_rank1_random([8, 9, 7], 0),
                          CrossConfig(eps_ca=1e-10, seed=0), info)
    assert info.converged
    assert tt_round(t, 1e-8).ranks == [1, 1, 1, 1]

    samples = np.column_stack([rng.integers(1, n + 1, 1000) for n in (8, 9, 7)])
    err = np.max(np.abs(tt_elements(t, samples) - dense_oracle(data)(samples)))
    assert err <= 1e-8 * np.linalg.norm(data)


@pytest.mark.parametrize('sizes', [[6, 7, 5], [5, 4, 6, 5], [12, 10]])
def test_stored_low_rank_oracle(rng, sizes):
    ranks = [1] + [2] * (len(sizes) - 1) + [1]
    source = TTTensor([rng.standard_normal((ranks[k], n, ranks[k + 1])) for k, n in enumerate(sizes)])
    eps = 1e-6
    t = cross_approximate(lambda idx: tt_elements(source, idx), tt_rank1_random(sizes, 1),
                          CrossConfig(eps_ca=eps, seed=1))
    full, ref = tt_to_full(t).data, tt_to_full(source).data
    assert np.linalg.norm(full - ref) <= 10 * eps * np.linalg.norm(ref)


def test_constant_oracle():
    t = cross_approximate(lambda idx: np.full(idx.shape[0], 3.0), tt_rank1_random([4, 5, 6], 2),
                          CrossConfig(eps_ca=1e-10))
    assert tt_round(t, 1e-10).ranks == [1, 1, 1, 1]
    np.testing.assert_allclose(tt_to_full(t).data, 3.0, atol=1e-12)


def test_cross_interpolates_sampled_entries(rng):
    data = np.fromfunction(lambda i, j, k: 1.0 / (1.0 + i + j + k), (6, 6, 6))
    seen = []

    def oracle(idx):
        seen.append(idx.copy())
        return dense_oracle(data)(idx)

    t = cross_approximate(oracle, tt_rank1_random([6, 6, 6], 3), CrossConfig(eps_ca=1e-8))
    # the last sweep's fibers are reproduced exactly
    last = seen[-1]
    np.testing.assert_allclose(tt_elements(t, last), dense_oracle(data)(last), atol=1e-10)


def test_cross_is_deterministic():
    data = np.fromfunction(lambda i, j, k: np.exp(-0.1 * (i - j) ** 2) + 0.01 * k, (7, 7, 7))
    cfg = CrossConfig(eps_ca=1e-6, seed=5)
    a = cross_approximate(dense_oracle(data), tt_rank1_random([7, 7, 7], 5), cfg)
    b = cross_approximate(dense_oracle(data), tt_rank1_random([7, 7, 7], 5), cfg)
    for ga, gb in zip(a.cores, b.cores):
        np.testing.assert_array_equal(ga, gb)


def test_cross_reports_nonfinite_index():
    def oracle(idx):
        values = np.ones(idx.shape[0])
        values[np.all(idx == [2, 3], axis=1)] = np.nan
        return values

    with pytest.raises(CrossError) as exc:
        cross_approximate(oracle, tt_rank1([np.ones(3), np.ones(4)]), CrossConfig(eps_ca=1e-6))
    assert exc.value.index == (2, 3)


@pytest.mark.parametrize('bad', [np.inf, np.nan])
def test_cross_stops_when_iterate_norm_is_not_finite(monkeypatch, bad):
    calls = []

    def oracle(idx):
        calls.append(idx.shape[0])
        return np.ones(idx.shape[0])

    monkeypatch.setattr(tt_cross, 'tt_norm', lambda t: bad)
    with pytest.raises(ValueError, match="nonfinite norm"):
        cross_approximate(oracle, tt_rank1_random([6, 6, 6], 0), CrossConfig(eps_ca=1e-8, max_sweeps=50))
    # stopped on the first convergence check, after the second sweep
    assert len(calls) <= 2 * 3


def test_cross_non_convergence_is_flagged():
    data = np.random.default_rng(0).standard_normal((8, 8, 8))
    info = CrossInfo()
    t = cross_approximate(dense_oracle(data), tt_rank1_random([8, 8, 8], 0),
                          CrossConfig(eps_ca=1e-12, max_sweeps=2, max_rank=2), info)
    assert not info.converged
    assert info.sweeps == 2
    assert t.mode_sizes == [8, 8, 8]


def test_evaluation_count_growth():
    def separable_gaussian(idx):
        x = (idx - 8.0) / 4.0
        return np.exp(-np.sum(x ** 2, axis=1))

    counts = {}
    for d in (3, 6):
        info = CrossInfo()
        cross_approximate(separable_gaussian, tt_rank1_random([16] * d, 0),
                          CrossConfig(eps_ca=1e-8, kick_rank=1), info)
        counts[d] = info.evaluations
    assert counts[6] <= 2.5 * counts[3]


def test_cheb_grid_gaussian():
    grid = ChebGrid.uniform(3, 20, -5.0, 5.0)

    def gauss(X):
        return (2 * np.pi) ** -1.5 * np.exp(-0.5 * np.sum(X ** 2, axis=1))

    t = tt_round(cross_on_cheb_grid(gauss, grid, tt_rank1_random(grid.sizes, 0),
                                    CrossConfig(eps_ca=1e-10)), 1e-8)
    assert t.ranks == [1, 1, 1, 1]

    # N=20 has no node at zero; compare with the function at a grid node instead
    idx = np.array([[10, 10, 10]])
    assert tt_elements(t, idx)[0] == pytest.approx(gauss(grid.points(idx))[0], rel=1e-8)


def test_cheb_grid_center_node():
    grid = ChebGrid.uniform(3, 21, -5.0, 5.0)

    def gauss(X):
        return (2 * np.pi) ** -1.5 * np.exp(-0.5 * np.sum(X ** 2, axis=1))

    t = cross_on_cheb_grid(gauss, grid, tt_rank1_random(grid.sizes, 0), CrossConfig(eps_ca=1e-10))
    assert tt_elements(t, np.array([[11, 11, 11]]))[0] == pytest.approx(0.0634936359342, rel=1e-9)


def test_cheb_grid_constant_and_one_dimensional():
    grid = ChebGrid.uniform(2, 6, -1.0, 1.0)
    ones = cross_on_cheb_grid(lambda X: np.ones(X.shape[0]), grid, tt_rank1_random([6, 6], 0),
                              CrossConfig(eps_ca=1e-10))
    np.testing.assert_allclose(tt_to_full(ones).data, 1.0, atol=1e-12)

    line = ChebGrid.uniform(1, 9, 0.0, 2.0)
    t = cross_on_cheb_grid(lambda X: X[:, 0] ** 3, line, tt_rank1_random([9], 0), CrossConfig(eps_ca=1e-6))
    np.testing.assert_array_equal(tt_to_full(t).data, line.nodes[0] ** 3)


def test_cheb_grid_rejects_mismatched_guess():
    grid = ChebGrid.uniform(2, 5, -1.0, 1.0)
    with pytest.raises(ValueError):
        cross_on_cheb_grid(lambda X: X[:, 0], grid, tt_rank1_random([5, 6], 0), CrossConfig(eps_ca=1e-6))


def test_indices_passed_to_oracle_are_one_based():
    seen = []

    def oracle(idx):
        seen.append(idx)
        return np.ones(idx.shape[0])

    cross_approximate(oracle, tt_rank1_random([3, 4], 0), CrossConfig(eps_ca=1e-6))
    allidx = np.vstack(seen)
    assert allidx.min() >= 1
    assert allidx[:, 0].max() <= 3 and allidx[:, 1].max() <= 4
    assert {tuple(r) for r in allidx} <= set(itertools.product(range(1, 4), range(1, 5)))


def test_non_convergence_warning_is_formatted_lazily(caplog):
    data = np.random.default_rng(0).standard_normal((6, 6, 6))
    with caplog.at_level(logging.WARNING, logger='tt_cross'):
        cross_approximate(dense_oracle(data), tt_rank1_random([6, 6, 6], 0),
                          CrossConfig(eps_ca=1e-12, max_sweeps=2, max_rank=2))
    record = next(r for r in caplog.records if r.name == 'tt_cross')
    assert record.args
    assert "did not converge in 2 sweeps" in record.getMessage()
