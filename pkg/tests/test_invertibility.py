import math
from dataclasses import replace

import numpy as np
import pytest

from heavytail.errors import ParameterError
from heavytail.invertibility import (
    EXPERIMENTS,
    FROZEN_C_REF,
    ExperimentConfig,
    binom_se,
    condition_rows,
    corner_diameter,
    normal_lcd_params,
    planted_flat_rows,
    records_csv,
    resolve_c_ref,
    run_experiment,
    run_small_ball_profile,
    run_tensorization_check,
    small_ball_fit,
    tensorization_pair,
    trial_seed,
)
from heavytail.coverings import GridOperator
from heavytail.distributions import parse_distribution
from heavytail.geometry import LcdParams
from heavytail.norms import inf2_exact


def test_config_validation():
    with pytest.raises(ParameterError):
        ExperimentConfig(trials=0)
    with pytest.raises(ParameterError):
        ExperimentConfig(eps=(0.2, 0.1))
    cfg = ExperimentConfig(theta=0.3, rho=0.3)
    assert cfg.lcd_r == pytest.approx(0.5 * 0.09 * math.sqrt(0.3))
    assert replace(cfg, r=0.2).lcd_r == 0.2


def test_trial_seeds_are_independent_of_order():
    a = np.random.default_rng(trial_seed(7, 3)).random(3)
    b = np.random.default_rng(trial_seed(7, 3)).random(3)
    c = np.random.default_rng(trial_seed(7, 4)).random(3)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_binom_se():
    assert binom_se(0.5, 100) == pytest.approx(0.05)
    assert binom_se(0.0, 10) == 0.0


def test_small_ball_fit_exact_line():
    # 1000 values evenly spread on [0, 1): P{s <= e} = e exactly on the grid
    scaled = (np.arange(1000) + 0.5) / 1000
    fit = small_ball_fit(scaled, [0.1, 0.2, 0.3, 0.4, 0.5])
    assert fit.L_hat == pytest.approx(1.0)
    assert fit.rms_residual < 1e-12 and fit.monotone and fit.covered.all()


def test_small_ball_fit_drops_nan():
    fit = small_ball_fit(np.array([0.1, np.nan, 0.3]), [0.2])
    assert fit.trials == 2 and fit.p[0] == 0.5


def test_tensorization_pair_chain():
    v, u = tensorization_pair(0.5, 0.6, rogozin_c=2.0)
    v1 = 0.5 * math.sqrt(0.4) / 4
    assert v == pytest.approx(v1 * math.sqrt(0.4 / 2))
    assert u == pytest.approx(math.exp(-0.4 / 8))
    v, u = tensorization_pair(0.5, 0.2)
    assert u == pytest.approx(math.exp(-0.5 / 8))


def test_condition_rows():
    B = np.array([[10.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0], [0.5, -0.5, 0.0, 0.0]])
    C, k = condition_rows(B)
    assert k == 2
    assert np.all(np.linalg.norm(C, axis=1) <= 2 + 1e-12)
    assert np.all(np.abs(C.sum(axis=1)) <= 2 + 1e-12)
    assert np.array_equal(C[2], B[2])


def test_corner_diameter_matches_brute_force():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 6))
    G = GridOperator((0, 1, 0, 0, 2, 0))
    W = A * G.diagonal / math.sqrt(6 * 0.25)
    signs = np.array(list(np.ndindex(*(2,) * 6)), dtype=float) * 2 - 1
    images = signs @ W.T
    brute = max(np.linalg.norm(a - b) for a in images for b in images)
    assert corner_diameter(A, G, 0.25) == pytest.approx(brute)
    assert corner_diameter(A, G, 0.25) == pytest.approx(2 * inf2_exact(W)[0])


def test_planted_rows_orthogonal_to_flat():
    R = planted_flat_rows(8, np.random.default_rng(0))
    assert np.allclose(R @ np.ones(8), 0.0)


def test_normal_lcd_params_defaults():
    cfg = ExperimentConfig(n=64, s=0.05, t_max_factor=10)
    p = normal_lcd_params(cfg)
    assert p.h == pytest.approx(0.4) and p.t_max == pytest.approx(80) and p.r == cfg.lcd_r


def test_frozen_c_ref_lookup():
    cfg = ExperimentConfig(dist="pareto:2.5", n=128, delta=0.25)
    assert resolve_c_ref(cfg) == FROZEN_C_REF[("symmetrized-pareto:2.5", 128, 0.25)]
    assert resolve_c_ref(replace(cfg, c_ref=3.0)) == 3.0


@pytest.mark.parametrize("name,kw", [
    ("smin", dict(n=20, trials=30)),
    ("regularize", dict(n=32, trials=10, calibration_trials=20)),
    ("cover", dict(n=16, trials=3, points=20)),
    ("symmetrize", dict(n=8, trials=10, calibration_trials=20)),
    ("normal-lcd", dict(n=12, trials=3, t_max_factor=20)),
    ("distance", dict(n=16, trials=30)),
])
def test_experiments_run_and_are_seeded(name, kw):
    cfg = ExperimentConfig(seed=3, **kw)
    a = run_experiment(name, cfg)
    b = run_experiment(name, cfg)
    assert a.csv == b.csv
    assert len(a.records) == cfg.trials
    header = a.csv.splitlines()[0].split(",")
    assert header[:2] == ["trial", "seed"]
    assert a.summary_dict()["experiment"] == name
    assert a.csv == records_csv(a.records, EXPERIMENTS[name].record)


def test_covering_experiment_contains_everything():
    res = run_experiment("cover", ExperimentConfig(n=16, trials=4, points=30, seed=1))
    s = res.summary_dict()
    assert s["contained"] == s["located"] == 120
    for r in res.records:
        assert r.exact_diameter <= 2 * r.exact_certificate * (1 + 1e-12)


def test_distance_record_cross_check():
    res = run_experiment("distance", ExperimentConfig(n=16, trials=20, seed=2))
    for r in res.records:
        assert r.distance == pytest.approx(r.distance_check, rel=1e-8, abs=1e-10)


def test_planted_normal_has_small_lcd():
    cfg = ExperimentConfig(n=16, trials=3, planted=True, t_max_factor=20)
    res = run_experiment("normal-lcd", cfg)
    for r in res.records:
        # x = 1/sqrt(n): t x hits the lattice at t = sqrt(n) / (1 + r) or earlier
        assert not r.censored and r.t_star <= math.sqrt(16) / (1 + cfg.lcd_r) + 1e-6


def test_tensorization_check():
    d = parse_distribution("gaussian")
    rep = run_tensorization_check(d, 8, np.ones(8) / math.sqrt(8), 200, seed=1)
    assert 0 <= rep.frequency <= 1 and rep.hits == round(rep.frequency * 200)
    assert rep.implied_bound == pytest.approx(rep.u ** 8)


def test_small_ball_profile():
    d = parse_distribution("rademacher")
    x = np.ones(16) / 4
    prof = run_small_ball_profile(x, d, LcdParams(h=1.0, r=0.1, t_max=50), 4000, [0.05, 0.5, 1.0], seed=0)
    assert prof.lcd_upper <= 4 / 1.1 + 1e-6
    assert np.all(np.diff(prof.concentration) >= 0)
    assert prof.in_range[-1]
