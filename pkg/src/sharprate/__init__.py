"""Sharp-rate checks for Riemann-sum approximations of int_0^1 Psi'(X_s) dX_s.

Drivers are Gaussian processes of fractional-Brownian type with Hoelder index
H in (1/2, 1) and integrands Psi' with jumps.  The package computes the
expected L1 discretisation error in closed form, estimates it by exact path
simulation, and compares both with the n^{1 - 2H} leading term.
"""
from .analytic import (
    exact_expected_error,
    leading_constant,
    normal_tail,
    phi,
    step_expectation,
    theorem_leading_term,
    upper_bound_expected_error,
)
from .convex import ConvexSpec, absolute_value, positive_part
from .experiment import fit_rate, mc_expected_error, rate_study, ratio_convergence
from .models import (
    FBM,
    BiFBM,
    CustomExpression,
    CustomTable,
    MultiMixedFBM,
    ParameterError,
    StationaryPowExp,
    SubFBM,
    model_from_dict,
)
from .sampler import sample_cholesky, sample_fbm_circulant, sample_paths

__version__ = "0.1.0"
