import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from heavytail.distributions import (
    EntryDistribution,
    empirical_levels,
    levels,
    levy_concentration,
    levy_params,
    levy_params_from_samples,
    parse_distribution,
    sample,
)
from heavytail.errors import NoValidPairError, ParameterError, ResolutionError

SPECS = ["gaussian", "rademacher", "uniform-symmetric", "student-t:3", "symmetrized-pareto:2.5",
         "centered-lognormal:0.5", "two-point-sparse:0.2"]


@pytest.mark.parametrize("spec", SPECS)
def test_normalized_moments(spec):
    d = parse_distribution(spec)
    x = d.sample(np.random.default_rng(1), 400_000)
    assert abs(x.mean()) < 0.02
    if spec.startswith(("student", "symmetrized")):
        # no fourth moment, so check the truncated second moment instead
        assert 0.8 < np.mean(np.minimum(x * x, 1e4)) < 1.05
    else:
        assert abs(x.var() - 1.0) < 0.02


@pytest.mark.parametrize("spec", ["student-t:3", "symmetrized-pareto:2.5", "centered-lognormal:0.5"])
def test_abs_sf_matches_samples(spec):
    d = parse_distribution(spec)
    x = np.abs(d.sample(np.random.default_rng(2), 200_000))
    for t in (0.3, 1.0, 2.5):
        assert abs((x >= t).mean() - d.abs_sf(t)) < 0.005


def test_student_t_sf_against_scipy():
    d = parse_distribution("t:5")
    s = math.sqrt(5 / 3)
    assert d.abs_sf(1.2) == pytest.approx(2 * stats.t.sf(1.2 * s, 5), rel=1e-12)


@pytest.mark.parametrize("spec", SPECS)
def test_isf_inverts_sf(spec):
    d = parse_distribution(spec)
    for k in range(1, 8):
        q = 2.0 ** -k
        t = d.abs_isf(q)
        assert d.abs_sf(t) <= q + 1e-9
        if t > 0:
            assert d.abs_sf(t * (1 - 1e-7) - 1e-12) >= q - 1e-9


def test_spec_round_trip_and_aliases():
    assert parse_distribution("pareto:2.5").spec == "symmetrized-pareto:2.5"
    assert parse_distribution("normal").family == "gaussian"
    d = parse_distribution("t:3")
    assert parse_distribution(d.spec) == d


@pytest.mark.parametrize("bad", ["cauchy", "student-t:2", "pareto:1.5", "two-point:1.5", "gaussian:1", "t:x"])
def test_bad_specs(bad):
    with pytest.raises(ParameterError):
        parse_distribution(bad)


def test_empirical_family(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("1\n2\n3\n4\n")
    d = parse_distribution(f"empirical:{p}")
    assert d.is_atomic and not d.is_analytic
    x = d.sample(0, 1000)
    assert set(np.round(np.unique(x) * d.scale + d.shift, 9)) <= {1.0, 2.0, 3.0, 4.0}
    p.write_text("2\n2\n")
    with pytest.raises(ParameterError):
        parse_distribution(f"empirical:{p}")


def test_sample_is_seeded():
    d = parse_distribution("student-t:3")
    assert np.array_equal(sample(d, 5, 10), sample(d, 5, 10))
    with pytest.raises(ParameterError):
        sample(d, 5, 0)


def test_gaussian_levels_closed_form():
    lv = levels(parse_distribution("gaussian"), 1, 4)
    expect = [0.0] + [stats.norm.isf(2.0 ** -k / 2) for k in range(1, 5)]
    assert np.allclose(lv.values, expect, rtol=1e-12)
    assert lv.K == 4 and lv.source == "analytic-inverse-cdf"


def test_pareto_levels_exact():
    # P{|x| >= t} = (t s)^-a  =>  tau_k = 2^(k/a) / s for k >= 0
    a = 2.5
    s = math.sqrt(a / (a - 2))
    lv = levels(parse_distribution(f"pareto:{a}"), 2, 6)
    k = np.arange(7)
    assert np.allclose(lv.values, (2.0 ** (k / a) / s) ** 2, rtol=1e-12)


def test_rademacher_levels_smoothed():
    lv = levels(parse_distribution("rademacher"), 1, 5)
    assert np.all(np.diff(lv.values) >= 0)
    assert lv.values[0] == pytest.approx(1.0)
    assert lv.values[-1] <= 1.0 + 1e-6
    with pytest.raises(ParameterError):
        levels(EntryDistribution("rademacher", (), 0.0), 1, 3)


def test_empirical_levels_resolution():
    x = np.arange(1024.0)
    with pytest.raises(ResolutionError):
        empirical_levels(x, 6)
    lv = empirical_levels(x, 5)
    assert list(lv.values) == [0.0, 512.0, 768.0, 896.0, 960.0, 992.0]


def test_levels_empirical_family(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("\n".join(str(v) for v in np.random.default_rng(0).standard_normal(500)))
    lv = levels(parse_distribution(f"empirical:{p}"), 1, 4, n_samples=4000)
    assert lv.source == "empirical-quantile"
    assert np.all(np.diff(lv.values) >= 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 10), st.sampled_from(SPECS[:6]), st.floats(1, 3))
def test_levels_monotone(K, spec, p):
    lv = levels(parse_distribution(spec), p, K)
    assert np.all(np.diff(lv.values) >= 0)
    assert lv.truncated_sum() >= 0


def test_levy_concentration_brute_force():
    rng = np.random.default_rng(3)
    s = rng.standard_normal(300)
    for z in (0.0, 0.05, 0.3, 2.0):
        val, lam = levy_concentration(s, z)
        brute = max(np.mean(np.abs(s - (c + z)) <= z) for c in s)
        assert val == pytest.approx(brute)
        assert np.mean(np.abs(s - lam) <= z + 1e-12) >= val


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=40), st.floats(0, 3), st.floats(0, 3))
def test_levy_concentration_monotone_in_z(xs, z1, z2):
    a, b = sorted((z1, z2))
    assert levy_concentration(np.array(xs), a)[0] <= levy_concentration(np.array(xs), b)[0]


def test_levy_params():
    p = levy_params(parse_distribution("gaussian"), confidence_samples=20_000)
    assert p.estimate <= 0.9 and p.u < 1 and p.v > 0
    with pytest.raises(NoValidPairError):
        levy_params_from_samples(np.ones(1000))
    fixed = levy_params_from_samples(np.random.default_rng(0).standard_normal(1000), v=0.1)
    assert fixed.v == 0.1
