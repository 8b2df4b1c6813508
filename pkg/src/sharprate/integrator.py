"""Pathwise Riemann sums, chain-rule integrals and their difference.

The per-path error is evaluated twice: as ``exact - riemann`` and as the sum
over atoms of the step gaps ``2 w_i Z_n^+(a_i)``.  Both must agree; this keeps
the decomposition behind the analytic engine under test on every path.

The linear part of Psi telescopes exactly in both the Riemann sum and the
chain-rule integral, so a spec without atoms gives an error of exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convex import ConsistencyError, ConvexSpec

__all__ = [
    "PathError",
    "riemann_sum",
    "exact_integral",
    "step_gaps",
    "path_error",
    "batch_errors",
]


@dataclass(frozen=True)
class PathError:
    riemann_sum: float
    exact_integral: float
    error: float


def _as_paths(path):
    X = np.asarray(path, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("a path needs n + 1 >= 2 grid values")
    return X


def _riemann(spec, X):
    dX = np.diff(X, axis=1)
    out = spec.beta * (X[:, -1] - X[:, 0])
    for a, w in spec.atoms:
        sgn = np.where(X[:, :-1] > a, 1.0, -1.0)
        out = out + w * np.sum(sgn * dX, axis=1)
    return out


def _exact(spec, X):
    x0, x1 = X[:, 0], X[:, -1]
    out = spec.beta * (x1 - x0)
    for a, w in spec.atoms:
        out = out + w * (np.abs(x1 - a) - np.abs(x0 - a))
    return out


def step_gaps(X, level: float) -> np.ndarray:
    """Z_n^+(level) per path: sum_k (X_k - a)^+ - (X_{k-1} - a)^+ - 1{X_{k-1} > a} dX_k."""
    X = _as_paths(X)
    prev, curr = X[:, :-1], X[:, 1:]
    gap = np.maximum(curr - level, 0.0) - np.maximum(prev - level, 0.0) - np.where(prev > level, curr - prev, 0.0)
    return gap.sum(axis=1)


def _atom_error(spec, X):
    out = np.zeros(X.shape[0])
    for a, w in spec.atoms:
        out = out + 2.0 * w * step_gaps(X, a)
    return out


def batch_errors(spec: ConvexSpec, paths, *, tol: float = 1e-10) -> np.ndarray:
    """exact - riemann for each row of ``paths`` (shape (m, n + 1)), cross-checked."""
    X = _as_paths(paths)
    err = _exact(spec, X) - _riemann(spec, X)
    alt = _atom_error(spec, X)
    scale = 1.0 + np.max(np.abs(X), axis=1) * (1.0 + sum(abs(w) for _, w in spec.atoms))
    if np.any(np.abs(err - alt) > tol * scale):
        worst = float(np.max(np.abs(err - alt)))
        raise ConsistencyError(f"path error representations differ by {worst:.3e}")
    return err


def riemann_sum(spec: ConvexSpec, path) -> float:
    return float(_riemann(spec, _as_paths(path))[0])


def exact_integral(spec: ConvexSpec, path) -> float:
    return float(_exact(spec, _as_paths(path))[0])


def path_error(spec: ConvexSpec, path) -> PathError:
    X = _as_paths(path)
    r = float(_riemann(spec, X)[0])
    e = float(_exact(spec, X)[0])
    err = float(batch_errors(spec, X)[0])
    return PathError(riemann_sum=r, exact_integral=e, error=err)
