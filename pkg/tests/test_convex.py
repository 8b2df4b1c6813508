import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharprate.convex import (
    ConvexSpec,
    absolute_value,
    convexity_gap,
    positive_part,
    psi,
    psi_prime_left,
    spec_from_dict,
)
from sharprate.models import ParameterError

finite = st.floats(-5.0, 5.0, allow_nan=False)
atoms = st.lists(st.tuples(finite, st.floats(0.0, 3.0)), min_size=0, max_size=5)
signed_atoms = st.lists(st.tuples(finite, st.floats(-3.0, 3.0)), min_size=1, max_size=5)


def test_positive_part_is_x_plus():
    spec = positive_part(0.4)
    x = np.linspace(-2, 2, 41)
    np.testing.assert_allclose(psi(spec, x), np.maximum(x - 0.4, 0.0), atol=1e-15)
    # left derivative: 0 at the kink, 1 above
    assert psi_prime_left(spec, 0.4) == 0.0
    assert psi_prime_left(spec, 0.41) == 1.0


def test_left_derivative_matches_finite_difference():
    spec = ConvexSpec(0.3, -0.2, ((-1.0, 0.7), (0.5, 1.2), (2.0, 0.1)))
    x = np.array([-3.0, -1.0, 0.0, 0.5, 1.7, 2.0, 4.0])
    h = 1e-7
    fd = (psi(spec, x) - psi(spec, x - h)) / h
    np.testing.assert_allclose(psi_prime_left(spec, x), fd, atol=1e-6)


def test_atoms_are_merged_and_sorted():
    spec = ConvexSpec(atoms=((1.0, 0.5), (-1.0, 0.2), (1.0, 0.25)))
    assert spec.atoms == ((-1.0, 0.2), (1.0, 0.75))


def test_negative_weight_needs_signed():
    with pytest.raises(ParameterError):
        ConvexSpec(atoms=((0.0, -1.0),))
    spec = ConvexSpec(atoms=((0.0, -1.0),), signed=True)
    assert not spec.is_convex


def test_spec_from_dict():
    spec = spec_from_dict({"beta": 0.5, "alpha": 0.0, "atoms": [[0, 0.5]]})
    assert spec == positive_part(0.0)
    assert spec_from_dict(spec.to_dict()) == spec
    for bad in ({"atoms": [[0, 1, 2]]}, {"atoms": [[0, -1]]}, {"gamma": 1}, {"atoms": [[0, 1]], "signed": "yes"}):
        with pytest.raises(ParameterError):
            spec_from_dict(bad)


def test_absolute_value_gap_example():
    spec = absolute_value(0.0)
    # |x| - |y| - sgn_-(y)(x - y) at y = 0 (left derivative -1), x = 1: 1 - 0 + 1 = 2
    assert convexity_gap(spec, 1.0, 0.0) == 2.0
    assert convexity_gap(spec, -1.0, 0.0) == 0.0


@settings(max_examples=300, deadline=None)
@given(alpha=finite, beta=finite, atoms=atoms, x=finite, y=finite)
def test_gap_nonnegative_for_convex(alpha, beta, atoms, x, y):
    spec = ConvexSpec(alpha, beta, tuple(atoms))
    assert convexity_gap(spec, x, y) >= -1e-12


@settings(max_examples=300, deadline=None)
@given(alpha=finite, beta=finite, atoms=signed_atoms, x=finite, y=finite)
def test_gap_representations_agree_signed(alpha, beta, atoms, x, y):
    spec = ConvexSpec(alpha, beta, tuple(atoms), signed=True)
    # convexity_gap raises if the direct and atom forms disagree
    convexity_gap(spec, x, y)


@settings(max_examples=200, deadline=None)
@given(atoms=atoms, c=st.floats(0.01, 10.0))
def test_gap_is_homogeneous(atoms, c):
    spec = ConvexSpec(0.0, 0.0, tuple(atoms))
    x, y = np.array([1.3, -0.4]), np.array([-0.2, 0.9])
    np.testing.assert_allclose(convexity_gap(spec.scaled(c), x, y), c * convexity_gap(spec, x, y), rtol=1e-12, atol=1e-12)
