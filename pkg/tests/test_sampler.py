import io

import numpy as np
import pytest

from sharprate.models import FBM, CustomTable, StationaryPowExp, SubFBM
from sharprate.sampler import (
    FACTOR_CACHE,
    NotPositiveDefinite,
    block_size,
    cholesky_factor,
    circulant_eigenvalues,
    fgn_autocovariance,
    grid_covariance,
    iter_path_chunks,
    sample_cholesky,
    sample_fbm_circulant,
    sample_paths,
    write_paths_csv,
)
from sharprate.verify import covariance_zscores


def test_cholesky_factor_small_grid():
    L = cholesky_factor(FBM(0.75), 2)
    expected = np.array([[0.59460356, 0.0], [0.84089642, 0.5411961]])
    np.testing.assert_allclose(L, expected, atol=5e-9)
    S = grid_covariance(FBM(0.75), 2)
    np.testing.assert_allclose(L @ L.T, S, atol=1e-15)


def test_fgn_autocovariance():
    assert fgn_autocovariance(0.75, 0) == 1.0
    assert fgn_autocovariance(0.75, 1) == pytest.approx(2**0.5 - 1)
    assert fgn_autocovariance(0.5, np.arange(1, 5)) == pytest.approx(np.zeros(4))


def test_circulant_eigenvalues_nonnegative():
    for h in (0.55, 0.75, 0.95):
        lam = circulant_eigenvalues(h, 1000)
        assert lam.size == 2048 and lam.min() >= 0.0


def test_stationary_keeps_origin_row():
    model = StationaryPowExp(0.75)
    assert grid_covariance(model, 4).shape == (5, 5)
    batch = sample_cholesky(model, 4, 3, 0)
    assert batch.values.shape == (3, 5) and np.all(batch.values[:, 0] != 0.0)


def test_origin_is_exactly_zero_for_fbm():
    for sampler in ("cholesky", "circulant"):
        b = sample_paths(FBM(0.7), 8, 5, 1, sampler=sampler)
        assert np.all(b.values[:, 0] == 0.0)


@pytest.mark.parametrize("sampler", ["cholesky", "circulant"])
def test_chunking_and_threads_do_not_change_paths(sampler):
    model = FBM(0.75)
    n, m = 64, 700
    whole = sample_paths(model, n, m, 9, sampler=sampler).values
    threaded = sample_paths(model, n, m, 9, sampler=sampler, threads=4).values
    pieces = np.concatenate([b.values for b in iter_path_chunks(model, n, m, 9, sampler=sampler, chunk=128)])
    tail = sample_paths(model, n, 100, 9, sampler=sampler, start=600).values
    np.testing.assert_array_equal(whole, threaded)
    np.testing.assert_array_equal(whole, pieces)
    np.testing.assert_array_equal(whole[600:], tail)


def test_block_size_power_of_two():
    for width in (3, 17, 4096, 10**6):
        b = block_size(width)
        assert b & (b - 1) == 0 and (b == 1 or b * width <= 1 << 21)


@pytest.mark.parametrize("model", [FBM(0.6), SubFBM(0.75)], ids=lambda m: m.name)
def test_cholesky_covariance_within_noise(model):
    n, m = 8, 40_000
    X = sample_cholesky(model, n, m, 3).values[:, 1:]
    z = covariance_zscores(X, grid_covariance(model, n))
    assert z.max() < 4.0


def test_circulant_covariance_within_noise():
    n, m = 12, 40_000
    X = sample_fbm_circulant(0.8, n, m, 4).values[:, 1:]
    z = covariance_zscores(X, grid_covariance(FBM(0.8), n))
    assert z.max() < 4.0


def test_not_positive_definite():
    # symmetric, V(1) = 1, non-decreasing V and a non-negative variogram, yet R(1/2, 1) = -1.5
    M = np.array([[0.0, 0.0, 0.0], [0.0, 1.0, -1.5], [0.0, -1.5, 1.0]])
    model = CustomTable(M, 2, hurst=0.75, sigma2=1.0)
    FACTOR_CACHE.clear()
    with pytest.raises(NotPositiveDefinite) as exc:
        cholesky_factor(model, 2)
    assert exc.value.min_eigenvalue == pytest.approx(-0.5)


def test_write_paths_csv_format():
    batch = sample_paths(FBM(0.75), 4, 2, 7)
    buf = io.StringIO()
    write_paths_csv(batch, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "path_id,t,X"
    assert len(lines) == 1 + 2 * 5
    pid, t, x = lines[1].split(",")
    assert (pid, float(t), float(x)) == ("0", 0.0, 0.0)
    assert float(lines[-1].split(",")[2]) == batch.values[1, -1]
