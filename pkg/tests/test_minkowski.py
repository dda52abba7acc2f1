import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from covbracket.minkowski import (ETA, FourVector, apply, boost, identity, lower, minkowski_dot,
                                  raise_index, rotation)

finite = st.floats(-1e3, 1e3, allow_nan=False)
vec = st.tuples(finite, finite, finite, finite)


def test_metric_signature():
    assert np.array_equal(np.diag(ETA), [1, -1, -1, -1])
    with pytest.raises(ValueError):
        ETA[0, 0] = 2


def test_dot_examples():
    assert minkowski_dot([1, 0, 0, 0], [1, 0, 0, 0]) == 1
    assert minkowski_dot([0, 1, 0, 0], [0, 1, 0, 0]) == -1
    assert minkowski_dot([1, 0, 0, 1], [1, 0, 0, 1]) == 0


def test_fourvector_variance_roundtrip():
    v = FourVector(1.0, 2.0, 3.0, 4.0)
    assert np.array_equal(v.lower().array, [1, -2, -3, -4])
    assert v.lower().upper() == v
    assert np.array_equal(raise_index(lower(v.array)), v.array)


def test_dot_mixed_variance():
    v = FourVector(2.0, 1.0, 0.0, 0.0)
    assert minkowski_dot(v, v.lower()) == pytest.approx(3.0)


@given(vec, st.floats(-2, 2))
def test_boost_preserves_interval(v, r):
    lam = boost("x", r)
    v = np.array(v)
    w = apply(lam, v)
    scale = max(1.0, float(v @ v) * math.cosh(r) ** 2)
    assert abs(minkowski_dot(w, w) - minkowski_dot(v, v)) <= 1e-12 * scale


def test_boost_is_lorentz():
    for ax in "xyz":
        assert boost(ax, 0.7).eta_residual() < 1e-14


def test_inverse_and_compose():
    lam = boost("y", 0.4) @ rotation("z", 0.3)
    assert np.allclose((lam @ lam.inverse()).m, np.eye(4), atol=1e-14)
    assert np.array_equal(identity().m, np.eye(4))


def test_quarter_rotation_exact():
    m = rotation("z", math.pi / 2).m
    assert set(np.unique(m)) <= {-1.0, 0.0, 1.0}


def test_covariant_transform():
    lam = boost("x", 0.5)
    u = np.array([1.0, 0.2, 0.0, 0.3])
    v = FourVector(0.5, 0.1, -0.4, 0.2, "covariant")
    lu = apply(lam, u)
    lv = apply(lam, v)
    assert minkowski_dot(lu, lv) == pytest.approx(minkowski_dot(u, v), rel=1e-13)


def test_boost_rejects_nonfinite():
    with pytest.raises(ValueError):
        boost("x", float("inf"))
