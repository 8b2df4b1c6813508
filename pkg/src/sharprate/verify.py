"""Self-checks run by ``sharprate verify``.

Each suite returns a dict with at least ``passed`` and ``max_residual``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import analytic
from .convex import ConvexSpec, _gap_atoms, _gap_direct
from .integrator import ConsistencyError, batch_errors
from .models import FBM, BiFBM, MultiMixedFBM, StationaryPowExp, SubFBM
from .sampler import grid_covariance, sample_cholesky, sample_fbm_circulant

__all__ = [
    "VerifySizes",
    "random_spec",
    "random_relation_triples",
    "suite_convexity_gap",
    "suite_signed_representation",
    "suite_gaussian_relation",
    "suite_telescoping",
    "suite_path_decomposition",
    "suite_sampler_covariance",
    "covariance_zscores",
    "run_all",
]

IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class VerifySizes:
    n_specs: int = 10_000
    n_triples: int = 100_000
    sampler_n: int = 16
    sampler_m: int = 100_000
    decomposition_m: int = 2_000


def random_spec(rng: np.random.Generator, signed: bool = False, max_atoms: int = 5) -> ConvexSpec:
    k = int(rng.integers(1, max_atoms + 1))
    levels = rng.normal(0.0, 1.5, size=k)
    weights = rng.uniform(0.0, 2.0, size=k)
    if signed:
        weights = weights * rng.choice([-1.0, 1.0], size=k)
    return ConvexSpec(float(rng.normal()), float(rng.normal()), tuple(zip(levels.tolist(), weights.tolist())), signed)


def _gap_residuals(rng, n_specs, signed):
    worst, min_gap = 0.0, math.inf
    for _ in range(n_specs):
        spec = random_spec(rng, signed)
        x = rng.normal(0.0, 2.0, size=8)
        y = rng.normal(0.0, 2.0, size=8)
        atom = _gap_atoms(spec, x, y)
        worst = max(worst, float(np.max(np.abs(_gap_direct(spec, x, y) - atom))))
        min_gap = min(min_gap, float(np.min(atom)))
    return worst, min_gap


def suite_convexity_gap(n_specs=10_000, seed=0):
    worst, min_gap = _gap_residuals(np.random.default_rng([seed, 1]), n_specs, signed=False)
    return {
        "passed": worst <= IDENTITY_TOL and min_gap >= -IDENTITY_TOL,
        "max_residual": worst,
        "min_gap": min_gap,
        "cases": n_specs,
    }


def suite_signed_representation(n_specs=10_000, seed=0):
    worst, _ = _gap_residuals(np.random.default_rng([seed, 2]), n_specs, signed=True)
    return {"passed": worst <= IDENTITY_TOL, "max_residual": worst, "cases": n_specs}


def random_relation_triples(rng, size):
    """Valid (V_curr, V_prev, theta): theta between (sqrt Vc - sqrt Vp)^2 and (sqrt Vc + sqrt Vp)^2."""
    vp = rng.uniform(0.01, 1.0, size)
    vc = rng.uniform(vp, 1.0)
    lo = (np.sqrt(vc) - np.sqrt(vp)) ** 2
    hi = (np.sqrt(vc) + np.sqrt(vp)) ** 2
    theta = lo + (hi - lo) * rng.uniform(0.0, 1.0, size)
    return vc, vp, theta


def suite_gaussian_relation(n_triples=100_000, seed=0, relation=analytic.gaussian_relation_check):
    rng = np.random.default_rng([seed, 3])
    vc, vp, theta = random_relation_triples(rng, n_triples)
    worst = 0.0
    for c, p, th in zip(vc.tolist(), vp.tolist(), theta.tolist()):
        lhs, rhs = relation(c, p, th)
        worst = max(worst, abs(lhs - rhs))
    lhs, rhs = relation(1.0, 0.25, 0.5)
    counter_ok = abs(lhs - 0.25) <= IDENTITY_TOL and abs(rhs - 0.25) <= IDENTITY_TOL
    return {
        "passed": worst <= IDENTITY_TOL and counter_ok,
        "max_residual": worst,
        "counterexample": [lhs, rhs],
        "cases": n_triples,
    }


def builtin_models():
    return [
        FBM(0.6),
        FBM(0.75),
        FBM(0.9),
        MultiMixedFBM([0.6, 0.9], [0.5, 0.5]),
        StationaryPowExp(0.75),
        SubFBM(0.75),
        BiFBM(0.75, 0.8),
    ]


def suite_telescoping(ns=(1, 7, 64, 1024), levels=(-2.0, -1.0, -0.3, 0.5, 2.0)):
    worst = 0.0
    for model in builtin_models():
        for n in ns:
            V, _ = analytic.grid_step_moments(model, n)
            for a in levels:
                _, tails = analytic._scaled_moments(a, V)
                steps = math.fsum(a * tails[:-1] - a * tails[1:])
                total = a * tails[0] - a * tails[-1]
                worst = max(worst, abs(steps - total))
    return {"passed": worst <= IDENTITY_TOL, "max_residual": worst}


def suite_path_decomposition(m=2_000, seed=0, n=32):
    """Global and per-atom path errors agree and are non-negative for convex specs."""
    rng = np.random.default_rng([seed, 4])
    min_err, ok = math.inf, True
    for model in builtin_models():
        X = sample_cholesky(model, n, m, seed).values
        spec = random_spec(rng)
        try:
            err = batch_errors(spec, X)
        except ConsistencyError:
            ok = False
            continue
        min_err = min(min_err, float(err.min()))
    return {"passed": ok and min_err >= -IDENTITY_TOL, "min_error": min_err, "max_residual": 0.0 if ok else math.inf}


def covariance_zscores(values: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """|empirical E[X_i X_j] - Sigma_ij| / SE_ij with SE from the fourth moments."""
    X = values
    prods = X[:, :, None] * X[:, None, :]
    emp = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / math.sqrt(X.shape[0])
    return np.abs(emp - sigma) / se


def suite_sampler_covariance(n=16, m=100_000, seed=0, hurst=0.75):
    model = FBM(hurst)
    sigma = grid_covariance(model, n)
    circ = sample_fbm_circulant(hurst, n, m, seed).values[:, 1:]
    chol = sample_cholesky(model, n, m, seed + 1).values[:, 1:]
    z_circ = float(covariance_zscores(circ, sigma).max())
    z_chol = float(covariance_zscores(chol, sigma).max())
    # marginal variances: circulant vs Cholesky, independent seeds
    v1, v2 = (circ**2).mean(0), (chol**2).mean(0)
    s1 = (circ**2).std(0, ddof=1) / math.sqrt(m)
    s2 = (chol**2).std(0, ddof=1) / math.sqrt(m)
    z_var = float(np.max(np.abs(v1 - v2) / np.sqrt(s1**2 + s2**2)))
    return {
        "passed": z_circ <= 3.0 and z_chol <= 3.0 and z_var <= 3.0,
        "max_z_circulant": z_circ,
        "max_z_cholesky": z_chol,
        "max_z_variance_agreement": z_var,
        "max_residual": max(z_circ, z_chol, z_var),
        "n": n,
        "m": m,
    }


def run_all(sizes: VerifySizes = VerifySizes(), seed: int = 0) -> dict:
    return {
        "convexity_gap": suite_convexity_gap(sizes.n_specs, seed),
        "signed_representation": suite_signed_representation(sizes.n_specs, seed),
        "gaussian_relation": suite_gaussian_relation(sizes.n_triples, seed),
        "telescoping": suite_telescoping(),
        "path_decomposition": suite_path_decomposition(sizes.decomposition_m, seed),
        "sampler_covariance": suite_sampler_covariance(sizes.sampler_n, sizes.sampler_m, seed),
    }
