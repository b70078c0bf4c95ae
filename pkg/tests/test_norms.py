import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from heavytail.errors import CapError, DomainError, IllConditionedWarning
from heavytail.norms import (
    distance_to_span,
    inf2_exact,
    inf2_lower,
    inf2_upper,
    permute_rows_independently,
    smin,
    smin_with_vector,
    spectral_norm,
    unit_normal,
)


def brute_inf2(B):
    n = B.shape[1]
    return max(np.linalg.norm(B @ np.array(s)) for s in itertools.product((-1.0, 1.0), repeat=n))


@pytest.mark.parametrize("shape", [(1, 1), (3, 1), (2, 2), (5, 4), (4, 7), (8, 8), (6, 11)])
def test_exact_matches_brute_force(shape):
    B = np.random.default_rng(sum(shape)).standard_normal(shape)
    val, w = inf2_exact(B)
    assert val == pytest.approx(brute_inf2(B), rel=1e-12)
    assert set(np.unique(w)) <= {-1.0, 1.0}
    assert np.linalg.norm(B @ w) == pytest.approx(val, rel=1e-12)


def test_exact_known_values():
    assert inf2_exact(np.eye(5))[0] == pytest.approx(math.sqrt(5))
    assert inf2_exact(np.ones((3, 4)))[0] == pytest.approx(4 * math.sqrt(3))
    assert inf2_exact(np.zeros((2, 3)))[0] == 0.0


def test_exact_cap():
    with pytest.raises(CapError):
        inf2_exact(np.ones((2, 13)), cap=12)
    val, _ = inf2_exact(np.ones((1, 13)), cap=13)
    assert val == pytest.approx(13.0)


small = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 7)),
               elements=st.floats(-10, 10, allow_nan=False, allow_subnormal=False))


@settings(max_examples=80, deadline=None)
@given(small, st.integers(0, 2**31))
def test_triad_ordering(B, seed):
    exact, _ = inf2_exact(B)
    lower, v = inf2_lower(B, restarts=3, seed=seed)
    upper = inf2_upper(B)
    tol = 1e-9 * (1.0 + exact)
    assert lower <= exact + tol
    assert exact <= upper + tol
    assert spectral_norm(B) <= exact + tol
    assert np.linalg.norm(B @ v) == pytest.approx(lower, abs=tol)


@settings(max_examples=40, deadline=None)
@given(small, st.floats(-4, 4).filter(lambda c: abs(c) > 1e-3))
def test_exact_homogeneous(B, c):
    assert inf2_exact(c * B)[0] == pytest.approx(abs(c) * inf2_exact(B)[0], rel=1e-9, abs=1e-9)


def test_lower_ascent_is_local_max():
    B = np.random.default_rng(0).standard_normal((9, 9))
    val, v = inf2_lower(B, restarts=1, seed=1)
    for j in range(9):
        w = v.copy()
        w[j] = -w[j]
        assert np.linalg.norm(B @ w) <= val + 1e-12


def test_lower_from_start_never_decreases():
    B = np.random.default_rng(5).standard_normal((6, 6))
    s = np.ones(6)
    val, _ = inf2_lower(B, restarts=1, seed=0, start=s)
    assert val >= np.linalg.norm(B @ s) - 1e-12
    with pytest.raises(ValueError):
        inf2_lower(B, restarts=0)


def test_upper_formula():
    B = np.array([[1.0, -2.0], [0.0, 3.0]])
    rows = math.sqrt(3**2 + 3**2)
    spec = math.sqrt(2) * np.linalg.norm(B, 2)
    assert inf2_upper(B) == pytest.approx(min(rows, spec))


def test_smin_against_numpy():
    B = np.random.default_rng(2).standard_normal((7, 7))
    s, y = smin_with_vector(B)
    assert s == pytest.approx(np.linalg.svd(B, compute_uv=False)[-1], rel=1e-12)
    assert np.linalg.norm(B @ y) == pytest.approx(s, rel=1e-9, abs=1e-12)
    assert smin(np.ones((2, 3))) == 0.0
    wide_s, wide_y = smin_with_vector(np.random.default_rng(0).standard_normal((2, 3)))
    assert wide_s == 0.0 and np.linalg.norm(wide_y) == pytest.approx(1.0)


def test_distance_to_span():
    C = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    assert distance_to_span([3.0, -1.0, 2.0], C) == pytest.approx(2.0)
    assert distance_to_span([3.0, 4.0], np.zeros((2, 0))) == pytest.approx(5.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(0, 10**6))
def test_unit_normal_orthogonal(n, seed):
    A = np.random.default_rng(seed).standard_normal((n - 1, n))
    x = unit_normal(A)
    assert np.linalg.norm(x) == pytest.approx(1.0)
    assert np.linalg.norm(A @ x) <= 1e-8 * np.linalg.norm(A, 2)
    # distance from any column to the others is |<x, column>|
    C = A.T
    assert abs(x @ C[:, 0]) <= 1e-8 * np.linalg.norm(A)


def test_unit_normal_higher_dimensional_null_space():
    A = np.zeros((1, 4))
    A[0, 0] = 1.0
    x1 = unit_normal(A, seed=1)
    x2 = unit_normal(A, seed=1)
    assert np.array_equal(x1, x2) and abs(x1[0]) < 1e-12


def test_unit_normal_errors():
    with pytest.raises(DomainError):
        unit_normal(np.eye(3))
    A = np.array([[1.0, 0.0, 0.0], [0.0, 1e-14, 0.0]])
    with pytest.warns(IllConditionedWarning):
        unit_normal(A)


def test_permute_rows_keeps_multisets():
    B = np.arange(20.0).reshape(4, 5)
    P = permute_rows_independently(B, seed=3)
    assert np.array_equal(np.sort(P, axis=1), B)
    assert np.array_equal(P, permute_rows_independently(B, seed=3))
