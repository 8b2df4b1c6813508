"""Exact path sampling on the grid t_k = k/n.

Two samplers:

* ``sample_cholesky`` works for any model through the grid covariance matrix.
* ``sample_fbm_circulant`` uses circulant embedding of the fractional Gaussian
  noise autocovariance (O(n log n) per path) and is specific to fBm.

Normal draws are keyed by (seed, path index) through :mod:`sharprate.rng`, so a
batch has the same content whether it is produced in one call or in chunks,
on one worker or many.
"""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .models import CovarianceModel, ParameterError
from .rng import standard_normals

__all__ = [
    "NotPositiveDefinite",
    "EmbeddingError",
    "PathBatch",
    "FactorCache",
    "FACTOR_CACHE",
    "grid_times",
    "grid_covariance",
    "cholesky_factor",
    "fgn_autocovariance",
    "circulant_eigenvalues",
    "sample_cholesky",
    "sample_fbm_circulant",
    "sample_paths",
    "iter_path_chunks",
    "write_paths_csv",
    "CHUNK",
    "block_size",
    "resolve_sampler",
]

#: maximum paths per chunk
CHUNK = 8192
#: target number of normal draws held per chunk
_CHUNK_DRAWS = 1 << 21


class NotPositiveDefinite(ArithmeticError):
    def __init__(self, min_eigenvalue: float, message: str = ""):
        self.min_eigenvalue = float(min_eigenvalue)
        super().__init__(
            message or f"grid covariance is not positive definite (smallest eigenvalue {self.min_eigenvalue:.3e})"
        )


class EmbeddingError(ArithmeticError):
    """Circulant embedding produced a clearly negative eigenvalue."""


@dataclass(frozen=True)
class PathBatch:
    """m paths sampled at t_0..t_n; ``values`` has shape (m, n + 1)."""

    n: int
    m: int
    values: np.ndarray = field(repr=False)
    model: str
    seed: int
    sampler: str
    start: int = 0

    @property
    def times(self) -> np.ndarray:
        return grid_times(self.n)


class FactorCache:
    """Per-(model, n) factorisations, built once and then shared read-only."""

    def __init__(self):
        self._lock = threading.Lock()
        self._store: dict = {}

    def get(self, key, build):
        with self._lock:
            if key in self._store:
                return self._store[key]
        value = build()
        with self._lock:
            return self._store.setdefault(key, value)

    def clear(self):
        with self._lock:
            self._store.clear()

    def __len__(self):
        return len(self._store)


FACTOR_CACHE = FactorCache()


def grid_times(n: int) -> np.ndarray:
    return np.arange(n + 1) / n


def _drops_origin(model: CovarianceModel) -> bool:
    return float(model.variance(0.0)) == 0.0


def grid_covariance(model: CovarianceModel, n: int) -> np.ndarray:
    """R(t_j, t_k) on the grid; the t_0 row/column is dropped when V(0) = 0."""
    if n < 1:
        raise ParameterError("n", "grid size must be >= 1")
    t = grid_times(n)
    if _drops_origin(model):
        t = t[1:]
    tt, ss = np.meshgrid(t, t, indexing="ij")
    S = np.asarray(model.covariance(tt, ss), dtype=float)
    # exact symmetry regardless of rounding inside the covariance formula
    return 0.5 * (S + S.T)


def cholesky_factor(model: CovarianceModel, n: int) -> np.ndarray:
    """Lower Cholesky factor of :func:`grid_covariance`, cached per (model, n).

    On failure retries once with diagonal jitter 1e-12 * max(diag).
    """

    def build():
        S = grid_covariance(model, n)
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            jitter = 1e-12 * float(np.max(np.diag(S)))
            try:
                L = np.linalg.cholesky(S + jitter * np.eye(len(S)))
            except np.linalg.LinAlgError:
                raise NotPositiveDefinite(float(np.min(np.linalg.eigvalsh(S)))) from None
        L.setflags(write=False)
        return L

    return FACTOR_CACHE.get(("cholesky", model.key, n), build)


def fgn_autocovariance(H: float, k) -> np.ndarray:
    """Unit-step fractional Gaussian noise autocovariance rho(k)."""
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * H
    return 0.5 * (np.abs(k + 1.0) ** h2 - 2.0 * k**h2 + np.abs(k - 1.0) ** h2)


def _embedding_size(n: int) -> int:
    size = 1
    while size < 2 * n:
        size *= 2
    return size


def circulant_eigenvalues(H: float, n: int) -> np.ndarray:
    """Eigenvalues of the circulant embedding (length: first power of two >= 2n)."""

    def build():
        size = _embedding_size(n)
        half = size // 2
        lags = np.concatenate([np.arange(half + 1), np.arange(half - 1, 0, -1)])
        lam = np.fft.fft(fgn_autocovariance(H, lags)).real
        if lam.min() < -1e-10:
            raise EmbeddingError(f"circulant embedding failed: eigenvalue {lam.min():.3e}")
        lam = np.clip(lam, 0.0, None)
        lam.setflags(write=False)
        return lam

    return FACTOR_CACHE.get(("circulant", float(H), n), build)


def _check_batch(n, m):
    if n < 1:
        raise ParameterError("n", "grid size must be >= 1")
    if m < 1:
        raise ParameterError("m", "need at least one path")


def _cholesky_values(model, n, path_ids, seed):
    L = cholesky_factor(model, n)
    Z = standard_normals(seed, path_ids, L.shape[0])
    X = Z @ L.T
    if L.shape[0] == n:
        X = np.concatenate([np.zeros((len(path_ids), 1)), X], axis=1)
    return X


def _circulant_values(H, n, path_ids, seed):
    lam = circulant_eigenvalues(H, n)
    size = lam.size
    Z = standard_normals(seed, path_ids, 2 * size)
    xi = Z[:, :size] + 1j * Z[:, size:]
    Y = np.fft.fft(np.sqrt(lam / size) * xi, axis=1)
    incr = Y.real[:, :n] * float(n) ** (-H)
    X = np.zeros((len(path_ids), n + 1))
    np.cumsum(incr, axis=1, out=X[:, 1:])
    return X


def block_size(width: int) -> int:
    """Paths per block for ``width`` normal draws per path (a power of two).

    Depends only on the path width, never on the worker count.
    """
    size = CHUNK
    while size > 1 and size * width > _CHUNK_DRAWS:
        size //= 2
    return size


def _width(model, n, sampler):
    if sampler == "circulant":
        return 2 * _embedding_size(n)
    return n if _drops_origin(model) else n + 1


def _run_chunks(fn, start, m, threads, block):
    # boundaries sit at absolute multiples of the block size so every path is
    # always produced inside an identically shaped block
    stop = start + m
    cuts = [start] + list(range((start // block + 1) * block, stop, block)) + [stop]
    bounds = list(zip(cuts[:-1], cuts[1:]))
    ids = [np.arange(a, b, dtype=np.int64) for a, b in bounds]
    if threads is None or threads <= 1 or len(ids) == 1:
        parts = [fn(p) for p in ids]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, ids))
    return np.concatenate(parts, axis=0)


def sample_cholesky(model: CovarianceModel, n: int, m: int, seed: int, *, start: int = 0, threads: int = 1) -> PathBatch:
    """m paths (indices start..start+m-1) with the exact joint law N(0, Sigma)."""
    _check_batch(n, m)
    cholesky_factor(model, n)  # build once before fanning out
    block = block_size(_width(model, n, "cholesky"))
    values = _run_chunks(lambda ids: _cholesky_values(model, n, ids, seed), start, m, threads, block)
    return PathBatch(n=n, m=m, values=values, model=model.name, seed=int(seed), sampler="CHOLESKY", start=start)


def sample_fbm_circulant(H: float, n: int, m: int, seed: int, *, start: int = 0, threads: int = 1) -> PathBatch:
    """m exact fBm paths via circulant embedding of fGn; X_0 = 0."""
    if not (0.0 < H < 1.0):
        raise ParameterError("hurst", f"must lie in (0, 1), got {H!r}")
    _check_batch(n, m)
    circulant_eigenvalues(H, n)
    block = block_size(2 * _embedding_size(n))
    values = _run_chunks(lambda ids: _circulant_values(H, n, ids, seed), start, m, threads, block)
    return PathBatch(n=n, m=m, values=values, model=f"fbm(hurst={float(H)})", seed=int(seed), sampler="CIRCULANT", start=start)


def sample_paths(model: CovarianceModel, n: int, m: int, seed: int, *, sampler: str = "auto", start: int = 0, threads: int = 1) -> PathBatch:
    """Dispatch: ``auto`` picks circulant for fBm and Cholesky otherwise."""
    sampler = resolve_sampler(model, sampler)
    if sampler == "circulant":
        if model.kind.value != "fbm":
            raise ParameterError("sampler", "circulant sampler only supports fbm models")
        batch = sample_fbm_circulant(model.hurst, n, m, seed, start=start, threads=threads)
        return PathBatch(n=n, m=m, values=batch.values, model=model.name, seed=batch.seed, sampler=batch.sampler, start=start)
    if sampler == "cholesky":
        return sample_cholesky(model, n, m, seed, start=start, threads=threads)
    raise ParameterError("sampler", f"unknown sampler {sampler!r}")


def resolve_sampler(model: CovarianceModel, sampler: str = "auto") -> str:
    sampler = sampler.lower()
    if sampler == "auto":
        return "circulant" if model.kind.value == "fbm" else "cholesky"
    return sampler


def iter_path_chunks(model, n, m, seed, *, sampler="auto", threads=1, chunk=None):
    """Yield consecutive PathBatch pieces covering path indices 0..m-1."""
    sampler = resolve_sampler(model, sampler)
    chunk = chunk or block_size(_width(model, n, sampler)) * max(1, threads)
    for a in range(0, m, chunk):
        yield sample_paths(model, n, min(chunk, m - a), seed, sampler=sampler, start=a, threads=threads)


def write_paths_csv(batch: PathBatch, fh) -> None:
    """Write ``path_id,t,X`` rows (one per grid point) with 17 significant digits."""
    fh.write("path_id,t,X\n")
    t = batch.times
    for i, row in enumerate(batch.values):
        pid = batch.start + i
        for tk, x in zip(t, row):
            fh.write(f"{pid},{tk:.17g},{x:.17g}\n")
