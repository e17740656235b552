import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from normlab import geometry as geo
from normlab.errors import ZeroVector

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def vecs(d):
    return arrays(np.float64, d, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3)


pair = st.integers(2, 16).flatmap(lambda d: st.tuples(vecs(d), vecs(d)))


def test_normalize_examples():
    np.testing.assert_allclose(geo.normalize([3, 4]), [0.6, 0.8])
    np.testing.assert_array_equal(geo.normalize([1, 0, 0]), [1, 0, 0])
    with pytest.raises(ZeroVector):
        geo.normalize([0, 0])


def test_cosine_examples():
    assert geo.cosine_similarity([1, 0], [0, 1]) == 0
    assert geo.cosine_similarity([1, 0], [2, 0]) == 1
    assert geo.cosine_similarity([1, 1], [1, 0]) == pytest.approx(0.70710678, abs=1e-8)
    with pytest.raises(ZeroVector):
        geo.cosine_similarity([0, 0], [1, 0])


def test_tangent_project_examples(rng):
    np.testing.assert_allclose(geo.tangent_project([1, 1], [1, 0]), [0, 1])
    np.testing.assert_allclose(geo.tangent_project([2, 0], [1, 0]), [0, 0])
    a, b = rng.standard_normal((2, 16))
    out = geo.tangent_project(a, b)
    assert abs(out @ b) <= 1e-10 * np.linalg.norm(a) * np.linalg.norm(b)


def test_angle_examples():
    assert geo.angle_between([1, 0], [0, 1]) == pytest.approx(np.pi / 2)
    assert geo.angle_between([1, 0], [-1, 0]) == pytest.approx(np.pi)
    assert geo.angle_between([1, 1], [1, 0]) == pytest.approx(np.pi / 4)


def test_cosine_clamped():
    v = np.array([0.1, 0.2, 0.3]) * 3
    assert geo.cosine_similarity(v, v) <= 1.0
    assert geo.angle_between(v, v) == 0.0


@given(pair)
def test_projection_reconstructs(ab):
    a, b = ab
    bh = geo.normalize(b)
    rebuilt = geo.tangent_project(a, b) + (a @ bh) * bh
    np.testing.assert_allclose(rebuilt, a, rtol=1e-10, atol=1e-10 * np.linalg.norm(a))


@given(pair, st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_cosine_scale_invariant(ab, s, t):
    a, b = ab
    assert geo.cosine_similarity(s * a, t * b) == pytest.approx(geo.cosine_similarity(a, b), abs=1e-12)


@given(pair)
def test_projection_of_unit_has_sine_length(ab):
    a, b = ab
    lhs = np.linalg.norm(geo.tangent_project(geo.normalize(a), b))
    assert lhs == pytest.approx(np.sin(geo.angle_between(a, b)), abs=1e-10)


@given(pair)
def test_angle_range(ab):
    assert 0.0 <= geo.angle_between(*ab) <= np.pi


def test_row_helpers_match_scalar(rng):
    A = rng.standard_normal((5, 7))
    B = rng.standard_normal((5, 7))
    P = geo.tangent_project_rows(A, B)
    for k in range(5):
        np.testing.assert_allclose(P[k], geo.tangent_project(A[k], B[k]), atol=1e-14)
    with pytest.raises(ZeroVector):
        geo.normalize_rows(np.zeros((2, 3)))
