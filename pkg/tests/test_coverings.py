import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heavytail.coverings import (
    GridOperator,
    RefinedNet,
    check_theorem_range,
    count_bound_log,
    count_grid_operators,
    covering_radius_certificate,
    cube_index,
    enumerate_grid_operators,
    exponent_budget,
    locate_cube,
    locate_parallelepiped,
    parallelepiped_geometry,
    refine_net,
    theorem_id_bound_log,
)
from heavytail.errors import CoverageError, DomainError, ParameterError, ShapeError
from heavytail.norms import inf2_exact


def test_grid_operator_basics():
    G = GridOperator((0, 1, 4))
    assert G.n == 3 and G.exponent_sum == 5
    assert np.allclose(G.diagonal, [1.0, 0.5, 1 / 16])
    assert G.logdet == pytest.approx(-5 * math.log(2))
    assert GridOperator.from_text(G.to_text()) == G
    assert GridOperator.identity(2).codes == (0, 0)
    assert np.allclose(G.apply_columns(np.ones((2, 3))), [[1, 0.5, 1 / 16]] * 2)
    for bad in [(3,), (1024,), (-1,)]:
        with pytest.raises(ParameterError):
            GridOperator(bad)
    with pytest.raises(ParameterError):
        GridOperator.from_text("1 x")
    with pytest.raises(ShapeError):
        G.apply_columns(np.ones((2, 2)))


def test_deepest_code_underflows_to_zero_free_value():
    G = GridOperator((512,))
    assert G.diagonal[0] == 2.0 ** -512 > 0


def test_exponent_budget():
    assert exponent_budget(2, 0.4) == 1
    assert exponent_budget(1, math.log(2)) == 1


@pytest.mark.parametrize("delta", [0.2, 0.4, 0.8])
@pytest.mark.parametrize("n", range(1, 7))
def test_count_matches_enumeration(n, delta):
    codes = list(enumerate_grid_operators(n, delta))
    assert count_grid_operators(n, delta) == len(codes) == len(set(codes))


def test_count_known_values():
    # n=2, delta=0.4: W=1 so (0,0), (0,1), (1,0)
    assert count_grid_operators(2, 0.4) == 3
    assert count_grid_operators(1, 0.5) == 1
    # W = floor(4 * 0.8 / ln 2) = 4: codes from {0,1,2,4}
    assert count_grid_operators(4, 0.8) == len(list(enumerate_grid_operators(4, 0.8)))


def test_count_large_is_fast_and_bounded():
    c = count_grid_operators(1000, 0.25)
    assert math.log(c) <= count_bound_log(1000, 0.25)
    assert math.log(c) <= theorem_id_bound_log(1000, 0.25)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.floats(0.01, 1.0))
def test_count_bound_property(n, delta):
    c = count_grid_operators(n, delta)
    assert c >= 1
    assert math.log(c) <= count_bound_log(n, delta) + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.floats(0.05, 0.9), st.floats(0.05, 0.9))
def test_count_monotone_in_delta(n, d1, d2):
    a, b = sorted((d1, d2))
    assert count_grid_operators(n, a) <= count_grid_operators(n, b)


def test_count_errors():
    with pytest.raises(ParameterError):
        count_grid_operators(0, 0.5)
    with pytest.raises(ParameterError):
        count_grid_operators(3, 1.5)


def ball_points(n, count, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random((count, 1)) ** (1 / n)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 50), st.floats(0.5, 20), st.integers(0, 10**6))
def test_cube_cover_properties(n, K, seed):
    x = ball_points(n, 1, seed)[0]
    c = locate_cube(x, K)
    Kc = min(max(K, 2.0), 2 * math.sqrt(n))
    step = Kc / math.sqrt(n)
    assert np.max(np.abs(x - c)) <= step / 2 * (1 + 1e-12)
    assert np.count_nonzero(c) <= 4 * n / Kc**2 + 1e-9
    assert np.allclose(c, cube_index(x, K) * step)


def test_cube_rejects_outside_ball():
    with pytest.raises(DomainError):
        locate_cube(np.array([1.0, 0.1]), 2.0)
    with pytest.raises(DomainError):
        locate_cube(np.array([np.nan]), 2.0)


def test_cell_boundary_goes_to_lower_index():
    n = 4
    step = 2.0 / math.sqrt(n)  # K clamps to 2
    x = np.array([1.5 * step, 0, 0, 0]) / 2
    assert cube_index(x, 2.0)[0] in (0, 1)
    # exactly half a step is a tie: cell (j - 1/2, j + 1/2]
    x = np.array([0.5 * step, 0, 0, 0])
    assert cube_index(x, 2.0)[0] == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 40), st.integers(0, 10**6))
def test_parallelepiped_contains_point(n, seed):
    rng = np.random.default_rng(seed)
    delta = 0.25
    D = GridOperator(tuple(int(c) for c in rng.choice([0, 0, 0, 1, 2, 4, 512], n)))
    x = ball_points(n, 1, seed)[0]
    pid, center, widths = parallelepiped_geometry(x, D, delta)
    # scaled units: widths of 2^-512 are below the float spacing of x
    c = np.array(pid.cube) * (2.0 / math.sqrt(n))
    u = (x - c) / widths
    assert np.all(np.abs(u - np.array(pid.inner, dtype=float)) <= 0.5 + 1e-9)
    assert np.all(np.abs(x - center) <= widths + 1e-15)
    assert pid == locate_parallelepiped(x, D, delta)
    assert pid.codes == D.codes


def test_parallelepiped_id_text():
    pid = locate_parallelepiped(np.zeros(4), GridOperator.identity(4), 0.25)
    assert pid.to_text() == "(0 0 0 0;0 0 0 0;0 0 0 0;0.25)"


def test_theorem_range():
    with pytest.raises(ParameterError):
        check_theorem_range(10, 0.3)
    with pytest.raises(ParameterError):
        check_theorem_range(3, 0.05)
    check_theorem_range(5, 0.05)


def test_radius_certificate_bounds_exact_diameter():
    rng = np.random.default_rng(4)
    n, delta = 8, 0.25
    A = rng.standard_normal((n, n))
    D = GridOperator((0, 1, 0, 2, 0, 0, 4, 0))
    cert = covering_radius_certificate(A, D, delta)
    # radius of A(P) around its center is ||A D||_{inf->2} / sqrt(n delta)
    exact = inf2_exact(D.apply_columns(A))[0] / math.sqrt(n * delta)
    assert exact <= cert * (1 + 1e-12)
    assert covering_radius_certificate(np.zeros((n, n)), D, delta) == 0.0


def test_refined_net_anchor_distance():
    rng = np.random.default_rng(9)
    n, delta, eps = 8, 0.25, 0.3
    A = rng.standard_normal((n, n))
    D = GridOperator((0,) * n)
    base = np.zeros((1, n))
    cert = covering_radius_certificate(A, D, delta)
    pts = ball_points(n, 300, 1) * eps
    anchors, net = refine_net(pts, base, eps, delta, D)
    assert len(net) <= 300 and net.distinct_ids() == len(net)
    gaps = np.linalg.norm((pts - anchors) @ A.T, axis=1)
    assert np.all(gaps <= 2 * eps * cert * (1 + 1e-9))
    again, _ = refine_net(pts, base, eps, delta, D, net=net)
    assert np.array_equal(again, anchors)


def test_refined_net_miss_names_point():
    net = RefinedNet(np.zeros((1, 4)), 0.1, 0.25, GridOperator.identity(4))
    with pytest.raises(CoverageError, match="x="):
        net.anchor(np.array([0.5, 0, 0, 0]))
    with pytest.raises(ParameterError):
        RefinedNet(np.zeros((1, 4)), 0.0, 0.25, GridOperator.identity(4))


def test_refined_net_thread_safe():
    n = 8
    net = RefinedNet(np.zeros((1, n)), 1.0, 0.25, GridOperator.identity(n))
    pts = ball_points(n, 200, 3)
    results = {}

    def work(k):
        results[k] = np.array([net.anchor(p) for p in pts])

    threads = [threading.Thread(target=work, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for k in range(1, 4):
        assert np.array_equal(results[0], results[k])
