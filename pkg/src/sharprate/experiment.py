"""Rate studies: analytic sweeps over n, Monte Carlo estimates and log-log fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import analytic
from .convex import ConvexSpec
from .integrator import batch_errors
from .models import CovarianceModel, ParameterError, variogram_bounds
from .sampler import iter_path_chunks

__all__ = [
    "FitError",
    "RateFit",
    "McEstimate",
    "StudyResult",
    "fit_rate",
    "mc_path_errors",
    "mc_expected_error",
    "envelope_band",
    "rate_study",
    "ratio_convergence",
    "ENVELOPE_GRID",
]

#: largest grid used for the variogram bounds of the envelope band (O(n^2) pairs)
ENVELOPE_GRID = 2048


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple = ()


@dataclass(frozen=True)
class McEstimate:
    mean: float
    se: float
    m: int
    seed: int


@dataclass
class StudyResult:
    reports: list
    fit: RateFit
    expected_slope: float
    constant: float
    band: Optional[tuple] = None
    variogram_bounds: Optional[tuple] = None
    extra: dict = field(default_factory=dict)


def fit_rate(ns: Sequence[float], errors: Sequence[float]) -> RateFit:
    """Ordinary least squares of log(error) on log(n)."""
    if len(ns) != len(errors):
        raise FitError("ns and errors differ in length")
    if len(ns) < 3:
        raise FitError("a rate fit needs at least 3 points")
    e = np.asarray(errors, dtype=float)
    if np.any(e <= 0.0) or not np.all(np.isfinite(e)):
        raise FitError("errors must be positive and finite for a log-log fit")
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(e)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0.0:
        raise FitError("need at least two distinct n")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    syy = np.sum((y - ym) ** 2)
    r2 = 1.0 if syy == 0.0 else float(1.0 - np.sum(resid**2) / syy)
    return RateFit(slope, intercept, r2, tuple(zip(x.tolist(), y.tolist())))


def mc_path_errors(model, n, spec, m, seed, *, sampler="auto", threads=1) -> np.ndarray:
    """Per-path errors (exact - riemann) for path indices 0..m-1, in index order."""
    parts = [batch_errors(spec, b.values) for b in iter_path_chunks(model, n, m, seed, sampler=sampler, threads=threads)]
    return np.concatenate(parts)


def _estimate(abs_err: np.ndarray, seed: int) -> McEstimate:
    m = abs_err.size
    mean = math.fsum(abs_err) / m
    var = math.fsum((abs_err - mean) ** 2) / (m - 1)
    return McEstimate(mean=mean, se=math.sqrt(var / m), m=m, seed=int(seed))


def mc_expected_error(
    model: CovarianceModel,
    n: int,
    spec: ConvexSpec,
    m: int,
    seed: int = 0,
    *,
    sampler: str = "auto",
    threads: int = 1,
) -> McEstimate:
    """Mean and standard error of |exact - riemann| over m sampled paths."""
    if m < 2:
        raise ParameterError("m", "Monte Carlo needs m >= 2")
    err = mc_path_errors(model, n, spec, m, seed, sampler=sampler, threads=threads)
    return _estimate(np.abs(err), seed)


def envelope_band(model: CovarianceModel, spec: ConvexSpec, n: int) -> tuple[tuple[float, float], tuple[float, float]]:
    """([sigma_-^2 K, sigma_+^2 K], (sigma_-^2, sigma_+^2)) with K = sum_i |w_i| C(a_i).

    The variogram bounds are taken on a grid of min(n, ENVELOPE_GRID) points.
    """
    lo, hi = variogram_bounds(model, max(2, min(int(n), ENVELOPE_GRID)))
    K = math.fsum(abs(w) * analytic.leading_constant(model, a) for a, w in spec.atoms)
    return (lo * K, hi * K), (lo, hi)


def rate_study(
    model: CovarianceModel,
    spec: ConvexSpec,
    n_list: Sequence[int],
    mc: Optional[tuple[int, int]] = None,
    *,
    sampler: str = "auto",
    threads: int = 1,
) -> StudyResult:
    """Analytic (and optionally Monte Carlo) errors over ``n_list`` plus a log-log fit.

    ``mc`` is ``(m, seed)``.  Envelope models also get the two-sided constant band.
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3:
        raise FitError("rate_study needs at least 3 grid sizes")
    if any(b <= a for a, b in zip(n_list, n_list[1:])) or n_list[0] < 1:
        raise FitError("n_list must be strictly increasing positive integers")
    reports = []
    for n in n_list:
        est = None
        if mc is not None:
            est = mc_expected_error(model, n, spec, mc[0], mc[1], sampler=sampler, threads=threads)
        reports.append(analytic.error_report(model, n, spec, est))
    fit = fit_rate(n_list, [r.analytic_error for r in reports])
    majorant = analytic.total_variation(spec)
    constant = model.sigma2 * math.fsum(w * analytic.leading_constant(model, a) for a, w in majorant.atoms)
    result = StudyResult(reports=reports, fit=fit, expected_slope=1.0 - 2.0 * model.hurst, constant=constant)
    if model.envelope:
        result.band, result.variogram_bounds = envelope_band(model, spec, n_list[-1])
    return result


def ratio_convergence(model: CovarianceModel, spec: ConvexSpec, n_list: Sequence[int]) -> list[tuple[int, float]]:
    """(n, exact_expected_error * n^{2H - 1}) for each n."""
    if not spec.is_convex:
        raise analytic.ModeError("ratio_convergence needs a convex spec")
    h = model.hurst
    return [(int(n), analytic.exact_expected_error(model, int(n), spec) * float(n) ** (2.0 * h - 1.0)) for n in n_list]
