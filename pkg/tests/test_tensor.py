import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fatigue_pf import tensor as T

finite = st.floats(-1e3, 1e3, allow_nan=False)
sym6 = arrays(np.float64, 6, elements=finite)


@given(sym6, sym6)
def test_ddot_matches_matrix_contraction(a, b):
    full = np.sum(T.to_matrix(a) * T.to_matrix(b))
    assert np.isclose(T.ddot(a, b), full, rtol=1e-12, atol=1e-9)


@given(sym6)
def test_matrix_round_trip(a):
    assert np.array_equal(T.from_matrix(T.to_matrix(a)), a)


@given(sym6)
def test_dev_is_traceless_and_idempotent(a):
    d = T.dev(a)
    assert abs(T.trace(d)) <= 1e-12 * max(1.0, np.abs(a).max())
    assert np.allclose(T.dev(d), d, atol=1e-12)


@given(sym6)
def test_norm_is_frobenius(a):
    assert np.isclose(T.norm(a), np.linalg.norm(T.to_matrix(a)), rtol=1e-12, atol=1e-12)


@given(sym6)
def test_unit_has_unit_norm_or_vanishes(a):
    u = T.unit(a)
    n = T.norm(u)
    assert np.isclose(n, 1.0) or n == 0.0


def test_unit_floor_zeroes_small_tensors():
    t = T.from_components(xy=1e-9)
    assert np.all(T.unit(t, floor=1e-6) == 0.0)
    assert np.isclose(T.norm(T.unit(t)), 1.0)


def test_batched_shapes():
    a = np.random.default_rng(0).normal(size=(4, 3, 6))
    assert T.ddot(a, a).shape == (4, 3)
    assert T.dev(a).shape == (4, 3, 6)


def test_one_component_layout():
    x = np.array([[2.0], [-3.0]])
    assert np.array_equal(T.dev(x), x)
    assert np.array_equal(T.ddot(x, x), [4.0, 9.0])
    assert np.array_equal(T.trace(x), [2.0, -3.0])


def test_plane_strain_embedding():
    t = T.plane_strain(1.0, 2.0, 1.5)
    assert np.array_equal(t, [1.0, 2.0, 0.0, 1.5, 0.0, 0.0])
