import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from upr.model import encode, is_success, phase_distance, relative_mse
from upr.numerics import DimensionError

vec = arrays(float, 5, elements=st.floats(-100, 100, allow_nan=False))


def test_encode_examples():
    np.testing.assert_array_equal(encode(np.eye(2), [3.0, -4.0]), [3.0, 4.0])
    np.testing.assert_array_equal(encode(np.ones((3, 2)), np.zeros(2)), np.zeros(3))
    np.testing.assert_array_equal(encode([[1, 1], [1, -1]], [2.0, 1.0]), [3.0, 1.0])


def test_encode_batched_and_shape_error():
    A = np.random.default_rng(0).standard_normal((4, 3))
    X = np.random.default_rng(1).standard_normal((2, 3))
    np.testing.assert_array_equal(encode(A, X)[1], encode(A, X[1]))
    with pytest.raises(DimensionError):
        encode(A, np.zeros(4))


@settings(max_examples=100, deadline=None)
@given(vec)
def test_encode_sign_invariant_and_nonnegative(x):
    A = np.random.default_rng(5).standard_normal((7, 5))
    y = encode(A, x)
    assert np.all(y >= 0)
    np.testing.assert_array_equal(y, encode(A, -x))


def test_phase_distance_examples():
    x = np.array([1.0, -2.0, 0.5])
    assert phase_distance(x, x) == 0
    assert phase_distance(x, -x) == 0
    assert phase_distance([1.0, 0.0], [0.0, 1.0]) == 2.0
    with pytest.raises(DimensionError):
        phase_distance(np.ones(2), np.ones(3))


@settings(max_examples=200, deadline=None)
@given(vec, vec, st.floats(-10, 10, allow_nan=False))
def test_phase_distance_properties(a, b, c):
    d = phase_distance(a, b)
    assert d >= 0
    assert d == phase_distance(b, a) == phase_distance(-a, b)
    assert phase_distance(c * a, c * a) == 0


def test_relative_mse_examples():
    x = np.array([3.0, 4.0])
    assert relative_mse(x, x) == 0
    assert relative_mse(-x, x) == 0
    assert relative_mse(np.zeros(2), x) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        relative_mse(x, np.zeros(2))


def test_is_success_threshold_is_strict():
    assert is_success(1e-6)
    assert not is_success(1e-5)
    assert is_success(0.0)
