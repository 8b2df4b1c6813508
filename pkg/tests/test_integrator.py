import numpy as np
import pytest

from sharprate.convex import ConvexSpec, positive_part
from sharprate.integrator import batch_errors, exact_integral, path_error, riemann_sum, step_gaps


def test_hand_computed_path():
    # X = (0, 1, -1), (x)^+: left-point sum uses Psi'(0) = 0, Psi'(1) = 1 -> -2
    spec = positive_part(0.0)
    X = np.array([0.0, 1.0, -1.0])
    assert riemann_sum(spec, X) == pytest.approx(-2.0)
    assert exact_integral(spec, X) == pytest.approx(0.0)
    res = path_error(spec, X)
    assert res.error == pytest.approx(2.0)
    assert res.error == pytest.approx(res.exact_integral - res.riemann_sum)


def test_linear_spec_has_zero_error():
    rng = np.random.default_rng(0)
    X = np.cumsum(rng.normal(size=(50, 33)), axis=1)
    err = batch_errors(ConvexSpec(1.5, -2.0), X)
    assert np.all(err == 0.0)


def test_error_equals_twice_weighted_step_gaps():
    rng = np.random.default_rng(1)
    X = np.cumsum(rng.normal(size=(200, 17)), axis=1)
    spec = ConvexSpec(0.1, 0.3, ((-0.5, 0.7), (1.0, 0.2)))
    expected = sum(2 * w * step_gaps(X, a) for a, w in spec.atoms)
    np.testing.assert_allclose(batch_errors(spec, X), expected, atol=1e-12)
    assert batch_errors(spec, X).min() >= -1e-12


def test_step_gaps_by_hand():
    X = np.array([[0.0, 0.5, 0.8, 0.3]])
    assert np.all(step_gaps(X, -1.0) == 0.0)
    # level 0.1, steps: 0 -> 0.5 gives 0.4, 0.5 -> -0.4 gives 0 - 0.4 + 0.9 = 0.5,
    # -0.4 -> 0.2 gives 0.1
    g = step_gaps(np.array([[0.0, 0.5, -0.4, 0.2]]), 0.1)
    assert g[0] == pytest.approx(1.0)
