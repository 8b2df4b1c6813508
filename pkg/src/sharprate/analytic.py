"""Closed-form expected discretisation errors.

For a single level a and a step t_{k-1} -> t_k, the expected step gap

    E[(X_k - a)^+ - (X_{k-1} - a)^+ - 1{X_{k-1} > a}(X_k - X_{k-1})]

equals

    D_k(a) = sqrt(V_k) phi(a / sqrt(V_k)) - gamma_k sqrt(V_{k-1}) phi(a / sqrt(V_{k-1}))
             + a P(Y > a / sqrt(V_{k-1})) - a P(Y > a / sqrt(V_k)),

with gamma_k = R(t_k, t_{k-1}) / V_{k-1} (zero when V_{k-1} = 0) and
phi(a) = exp(-a^2/2) / sqrt(2 pi).  Summing over k and over the atoms of Psi''
gives the exact L1 error without any sampling, because the pathwise error is
a non-negative combination of step gaps in the convex case.

The leading-order behaviour is sigma2 * sum_i w_i C(a_i) * n^{1 - 2H} with
C(a) = int_0^1 V(s)^{-1/2} phi(a / sqrt(V(s))) ds.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, special

from .convex import ConvexSpec
from .models import CovarianceModel, ParameterError

__all__ = [
    "QuadratureError",
    "ModeError",
    "StepStats",
    "ErrorReport",
    "phi",
    "normal_tail",
    "grid_step_moments",
    "expected_step_gaps",
    "step_expectation",
    "expected_gap_sum",
    "exact_expected_error",
    "upper_bound_expected_error",
    "leading_constant",
    "leading_constant_with_error",
    "theorem_leading_term",
    "gaussian_relation_check",
    "total_variation",
    "error_report",
    "QUAD_RTOL",
]

QUAD_RTOL = 1e-10
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class QuadratureError(ArithmeticError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved relative error {achieved:.3e})")
        self.achieved = achieved


class ModeError(ValueError):
    """A convex-only operation was called with a signed spec."""


@dataclass(frozen=True)
class StepStats:
    k: int
    V_prev: float
    V_curr: float
    gamma_k: float
    D_k: float


@dataclass
class ErrorReport:
    n: int
    levels: tuple
    weights: tuple
    analytic_error: float
    leading_term: float
    remainder: float
    ratio: float
    mc_error: Optional[float] = None
    mc_se: Optional[float] = None
    extra: dict = field(default_factory=dict)


def phi(a):
    """E[Y 1{Y > a}] = exp(-a^2/2)/sqrt(2 pi); zero at +-infinity."""
    a = np.asarray(a, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * a * a)
    return out if out.ndim else float(out)


def normal_tail(a):
    """P(Y > a) for Y ~ N(0, 1), via the complementary error function."""
    a = np.asarray(a, dtype=float)
    out = 0.5 * special.erfc(a / math.sqrt(2.0))
    return out if out.ndim else float(out)


def _scaled_moments(a, V):
    """(sqrt(V) phi(a/sqrt(V)), P(Y > a/sqrt(V))) with the V = 0 conventions.

    With V = 0 the level a/sqrt(V) is sign(a) * inf, so the first entry is 0
    and the tail is 0 (a > 0) or 1 (a < 0).  For a = 0 the tail only ever
    appears multiplied by a, and 1/2 is returned.
    """
    V = np.asarray(V, dtype=float)
    sd = np.sqrt(V)
    pos = sd > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(pos, a / np.where(pos, sd, 1.0), np.sign(a) * np.inf)
    if a == 0.0:
        z = np.where(pos, z, 0.0)
    first = np.where(pos, sd * _INV_SQRT_2PI * np.exp(-0.5 * np.where(pos, z, 0.0) ** 2), 0.0)
    return first, normal_tail(z)


@functools.lru_cache(maxsize=64)
def _grid_stats(model: CovarianceModel, n: int):
    t = np.arange(n + 1) / n
    V = np.asarray(model.variance(t), dtype=float)
    R = np.asarray(model.covariance(t[1:], t[:-1]), dtype=float)
    Vp = V[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(Vp > 0.0, R / np.where(Vp > 0.0, Vp, 1.0), 0.0)
    for arr in (V, gamma):
        arr.setflags(write=False)
    return V, gamma


def grid_step_moments(model: CovarianceModel, n: int):
    """(V(t_0..t_n), gamma_1..gamma_n) on the equidistant grid."""
    if n < 1:
        raise ParameterError("n", "grid size must be >= 1")
    return _grid_stats(model, int(n))


def expected_step_gaps(model: CovarianceModel, n: int, a: float) -> np.ndarray:
    """D_1(a), ..., D_n(a) as an array."""
    V, gamma = grid_step_moments(model, n)
    a = float(a)
    m_curr, tail_curr = _scaled_moments(a, V[1:])
    m_prev, tail_prev = _scaled_moments(a, V[:-1])
    D = m_curr - gamma * m_prev
    if a != 0.0:
        D = D + a * tail_prev - a * tail_curr
    return D


def step_expectation(model: CovarianceModel, n: int, k: int, a: float) -> StepStats:
    if not (1 <= k <= n):
        raise ParameterError("k", f"step index must lie in 1..{n}")
    V, gamma = grid_step_moments(model, n)
    D = expected_step_gaps(model, n, a)
    return StepStats(k=k, V_prev=float(V[k - 1]), V_curr=float(V[k]), gamma_k=float(gamma[k - 1]), D_k=float(D[k - 1]))


def expected_gap_sum(model: CovarianceModel, n: int, a: float) -> float:
    """E Z_n^+(a) = sum_k D_k(a), summed with correct rounding (order independent)."""
    return math.fsum(expected_step_gaps(model, n, a))


def exact_expected_error(model: CovarianceModel, n: int, spec: ConvexSpec) -> float:
    """E|int Psi'(X) dX - Riemann sum| for a convex spec."""
    if not spec.is_convex:
        raise ModeError("exact_expected_error needs non-negative weights; use upper_bound_expected_error")
    return math.fsum(2.0 * w * expected_gap_sum(model, n, a) for a, w in spec.atoms)


def upper_bound_expected_error(model: CovarianceModel, n: int, spec: ConvexSpec) -> float:
    """Total-variation bound 2 sum |w_i| E Z_n^+(a_i); equal to the exact error if convex."""
    return math.fsum(2.0 * abs(w) * expected_gap_sum(model, n, a) for a, w in spec.atoms)


def _integrand(model, a):
    def f(s):
        V = float(model.variance(s))
        if V <= 0.0:
            return 0.0 if a != 0.0 else math.inf
        sd = math.sqrt(V)
        return _INV_SQRT_2PI * math.exp(-0.5 * (a / sd) ** 2) / sd

    return f


def _quad(f, lo, hi):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=500)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature did not converge: {exc}", math.nan) from None
    return val, err


@functools.lru_cache(maxsize=1024)
def leading_constant_with_error(model: CovarianceModel, a: float) -> tuple[float, float]:
    """C(a) and the achieved relative error estimate.

    [0, 0.1] is mapped through s = u^p with p = 1/(1 - H_eff), which removes
    the s^{-H} endpoint singularity of models with V(s) ~ s^{2H}.
    """
    if not model.continuous:
        raise ParameterError("model", "leading constant needs a continuous variance; tabulated custom models are grid-only")
    a = float(a)
    f = _integrand(model, a)
    delta = 0.1
    p = 1.0 / (1.0 - model.hurst)

    def g(u):
        if u <= 0.0:
            return 0.0
        return f(min(u**p, delta)) * p * u ** (p - 1.0)

    v1, e1 = _quad(g, 0.0, delta ** (1.0 / p))
    v2, e2 = _quad(f, delta, 1.0)
    val = v1 + v2
    rel = (e1 + e2) / abs(val) if val != 0.0 else 0.0
    if not math.isfinite(val) or rel > QUAD_RTOL:
        raise QuadratureError("leading constant quadrature missed its tolerance", rel)
    return val, rel


def leading_constant(model: CovarianceModel, a: float) -> float:
    """C(a) = int_0^1 V(s)^{-1/2} phi(a / sqrt(V(s))) ds."""
    return leading_constant_with_error(model, float(a))[0]


def total_variation(spec: ConvexSpec) -> ConvexSpec:
    """Same levels with |w_i|; the convex majorant used for bounds."""
    return ConvexSpec(spec.alpha, spec.beta, tuple((a, abs(w)) for a, w in spec.atoms))


def theorem_leading_term(model: CovarianceModel, n: int, spec: ConvexSpec) -> float:
    """sigma2 * sum_i w_i C(a_i) * n^{1 - 2H}."""
    if not spec.is_convex:
        raise ModeError("theorem_leading_term needs a convex spec; pass total_variation(spec) for bounds")
    const = math.fsum(w * leading_constant(model, a) for a, w in spec.atoms)
    return model.sigma2 * const * float(n) ** (1.0 - 2.0 * model.hurst)


def gaussian_relation_check(V_curr: float, V_prev: float, theta: float, *, corrected: bool = True):
    """Both sides of sqrt(V_k) - gamma_k sqrt(V_{k-1}) = -(dsqrtV)^2/(2 sqrt V_{k-1}) + theta/(2 sqrt V_{k-1}).

    gamma_k is derived from R = (V_k + V_{k-1} - theta)/2.  ``corrected=False``
    puts theta/(2 V_{k-1}) in the last term instead, which does not hold in
    general (kept to show that the check can fail).
    """
    if not V_prev > 0.0:
        raise ParameterError("V_prev", "must be positive")
    sc, sp = math.sqrt(V_curr), math.sqrt(V_prev)
    R = 0.5 * (V_curr + V_prev - theta)
    lhs = sc - (R / V_prev) * sp
    denom = 2.0 * sp if corrected else 2.0 * V_prev
    rhs = -((sc - sp) ** 2) / (2.0 * sp) + theta / denom
    return lhs, rhs


def error_report(model: CovarianceModel, n: int, spec: ConvexSpec, mc=None) -> ErrorReport:
    """Analytic error, leading term, remainder and scaled ratio at one n.

    Signed specs report the total-variation upper bound and its leading term.
    """
    majorant = spec if spec.is_convex else total_variation(spec)
    analytic = upper_bound_expected_error(model, n, spec)
    leading = theorem_leading_term(model, n, majorant)
    return ErrorReport(
        n=int(n),
        levels=tuple(a for a, _ in spec.atoms),
        weights=tuple(w for _, w in spec.atoms),
        analytic_error=analytic,
        leading_term=leading,
        remainder=analytic - leading,
        ratio=analytic * float(n) ** (2.0 * model.hurst - 1.0),
        mc_error=None if mc is None else mc.mean,
        mc_se=None if mc is None else mc.se,
    )
