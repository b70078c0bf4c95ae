"""Seeded Monte Carlo experiments.

Every experiment is a per-trial function of ``(config, trial index)`` plus a
summarizer over the ordered records.  Trial ``i`` draws from
``SeedSequence([master, i])``, so results do not depend on how trials are
scheduled across workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Callable, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .coverings import (
    GridOperator,
    covering_radius_certificate,
    parallelepiped_geometry,
)
from .distributions import EntryDistribution, levy_concentration, levy_params, parse_distribution
from .errors import NumericalError, ParameterError
from .geometry import LcdParams, SphereParams, is_compressible, lcd
from .norms import (
    EXACT_CAP,
    distance_to_span,
    inf2_exact,
    inf2_lower,
    inf2_upper,
    permute_rows_independently,
    smin_with_vector,
    unit_normal,
)
from .regularizer import RegularizerParams, regularize_to_grid
from .textio import csv_text

# 99th percentiles of inf2_upper(A D~) sqrt(delta) / n from calibration runs
# (200 trials, master seed 20240101, disjoint from any experiment stream;
# measured 1.10439, rounded up).
FROZEN_C_REF = {
    ("symmetrized-pareto:2.5", 128, 0.25): 1.1044,
}
CALIBRATION_SEED = 20240101


@dataclass(frozen=True)
class ExperimentConfig:
    dist: str = "gaussian"
    n: int = 64
    trials: int = 200
    seed: int = 0
    delta: float = 0.25
    theta: float = 0.3
    rho: float = 0.3
    eps: tuple = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)
    L: float = 2.0 * math.e
    smoothing: float = 1e-6
    c_ref: Optional[float] = None
    calibration_trials: int = 200
    points: int = 100
    exact_cap: int = 12
    r: Optional[float] = None
    h: Optional[float] = None
    s: float = 0.05
    t_max: Optional[float] = None
    t_max_factor: float = 1000.0
    restarts: int = 8
    planted: bool = False
    rogozin_c: float = 1.0

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("trial count must be >= 1")
        if self.n < 1:
            raise ParameterError("n must be >= 1")
        eps = tuple(float(e) for e in self.eps)
        if not eps or any(e <= 0 for e in eps) or any(b <= a for a, b in zip(eps, eps[1:])):
            raise ParameterError("eps grid must be positive and strictly increasing")
        object.__setattr__(self, "eps", eps)

    @property
    def distribution(self) -> EntryDistribution:
        return parse_distribution(self.dist, self.smoothing)

    @property
    def sphere(self) -> SphereParams:
        return SphereParams(self.theta, self.rho)

    @property
    def lcd_r(self) -> float:
        return self.r if self.r is not None else self.sphere.lcd_r


def trial_seed(master: int, i: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master), int(i)])


def seed_value(ss: np.random.SeedSequence) -> int:
    """Stable 64-bit summary of a trial seed, recorded in the CSV."""
    return int(ss.generate_state(1, np.uint64)[0])


def binom_se(p, trials):
    p = np.asarray(p, dtype=float)
    return np.sqrt(p * (1.0 - p) / trials)


# -- records ------------------------------------------------------------------------


@dataclass
class SminRecord:
    trial: int
    seed: int
    smin: float
    scaled: float
    status: str = "ok"


@dataclass
class RegularizerRecord:
    trial: int
    seed: int
    logdet: float
    logdet_pre: float
    max_row_norm: float
    inf2_upper: float
    inf2_lower: float
    scaled_upper: float
    det_ok: bool
    success: bool


@dataclass
class CoveringRecord:
    trial: int
    seed: int
    logdet: float
    certificate: float
    ratio: float
    located: int
    contained: int
    exact_diameter: float
    exact_certificate: float


@dataclass
class SymmetrizationRecord:
    trial: int
    seed: int
    rescaled_rows: int
    inf2_upper: float
    inf2_lower: float
    inf2_exact: float
    ratio_upper: float
    within: bool


@dataclass
class NormalLcdRecord:
    trial: int
    seed: int
    compressible: bool
    censored: bool
    t_star: float
    lower_bound: float
    lower_scaled: float


@dataclass
class DistanceRecord:
    trial: int
    seed: int
    smin: float
    incompressible: bool
    distance: float
    distance_check: float


# -- trials ---------------------------------------------------------------------------


def _smin_trial(cfg: ExperimentConfig, i: int) -> SminRecord:
    ss = trial_seed(cfg.seed, i)
    rng = np.random.default_rng(ss)
    A = cfg.distribution.sample(rng, (cfg.n, cfg.n))
    try:
        s, _ = smin_with_vector(A)
        status = "ok"
    except NumericalError:
        s, status = math.nan, "numerical-error"
    return SminRecord(i, seed_value(ss), s, s * math.sqrt(cfg.n), status)


def resolve_c_ref(cfg: ExperimentConfig, jobs: int = 1) -> float:
    if cfg.c_ref is not None:
        return float(cfg.c_ref)
    key = (cfg.distribution.spec, cfg.n, float(cfg.delta))
    if key in FROZEN_C_REF:
        return FROZEN_C_REF[key]
    return calibrate_c_ref(cfg, jobs=jobs)


def calibrate_c_ref(cfg: ExperimentConfig, quantile: float = 0.99, jobs: int = 1) -> float:
    """99th percentile of ``inf2_upper(A D~) sqrt(delta) / n`` on a separate seed stream."""
    cal = replace(cfg, seed=CALIBRATION_SEED, trials=cfg.calibration_trials, c_ref=math.inf)
    recs = run_trials(_regularizer_trial, cal, jobs)
    return float(np.quantile([r.scaled_upper for r in recs], quantile))


def _regularizer_trial(cfg: ExperimentConfig, i: int) -> RegularizerRecord:
    ss = trial_seed(cfg.seed, i)
    rng = np.random.default_rng(ss)
    dist = cfg.distribution
    n = cfg.n
    A = dist.sample(rng, (n, n))
    params = RegularizerParams(L=cfg.L, delta=cfg.delta)
    G, cert, D = regularize_to_grid(A, cfg.delta, dist, params)
    AG = G.apply_columns(A)
    lower, _ = inf2_lower(AG, restarts=1, seed=rng)
    scaled = cert.inf2_upper * math.sqrt(cfg.delta) / n
    det_ok = cert.logdet >= -cfg.delta * n
    return RegularizerRecord(
        i, seed_value(ss), cert.logdet, D.logdet, cert.max_row_norm, cert.inf2_upper,
        lower, scaled, det_ok, bool(det_ok and scaled <= cfg.c_ref),
    )


def _ball_points(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.random((count, 1)) ** (1.0 / n)


def _covering_trial(cfg: ExperimentConfig, i: int) -> CoveringRecord:
    ss = trial_seed(cfg.seed, i)
    rng = np.random.default_rng(ss)
    dist = cfg.distribution
    n = cfg.n
    params = RegularizerParams(L=cfg.L, delta=cfg.delta)
    A = dist.sample(rng, (n, n))
    G, _, _ = regularize_to_grid(A, cfg.delta, dist, params)
    cert = covering_radius_certificate(A, G, cfg.delta)
    contained = 0
    X = _ball_points(rng, cfg.points, n)
    for x in X:
        _, center, widths = parallelepiped_geometry(x, G, cfg.delta)
        contained += bool(np.all(np.abs(x - center) <= widths * (1 + 1e-12)))
    # exact sub-check on a small instance: corner enumeration of A(P)
    m = min(n, cfg.exact_cap)
    delta_m = max(cfg.delta, 1.0 / (4.0 * m))
    delta_m = min(delta_m, 0.25)
    B = dist.sample(rng, (m, m))
    Gm, _, _ = regularize_to_grid(B, delta_m, dist, RegularizerParams(L=cfg.L, delta=delta_m))
    diam = corner_diameter(B, Gm, delta_m)
    cert_m = covering_radius_certificate(B, Gm, delta_m)
    return CoveringRecord(
        i, seed_value(ss), G.logdet, cert, cert / (math.sqrt(n) / cfg.delta),
        len(X), contained, diam, cert_m,
    )


def corner_diameter(A, G: GridOperator, delta: float) -> float:
    """Diameter of ``A(P)`` for the inner parallelepiped of ``G``, by corners.

    ``P`` is centrally symmetric, so the diameter is twice the largest image
    of a corner offset, which is an exact sign enumeration.
    """
    n = G.n
    W = G.apply_columns(np.asarray(A, dtype=float)) / math.sqrt(n * delta)
    value, _ = inf2_exact(W, cap=EXACT_CAP)
    return 2.0 * value


def _symmetrize_trial(cfg: ExperimentConfig, i: int) -> SymmetrizationRecord:
    ss = trial_seed(cfg.seed, i)
    rng = np.random.default_rng(ss)
    n = cfg.n
    B = cfg.distribution.sample(rng, (n, n))
    B, rescaled = condition_rows(B)
    Bt = permute_rows_independently(B, rng)
    upper = inf2_upper(Bt)
    lower, start = inf2_lower(Bt, restarts=cfg.restarts, seed=rng)
    exact = inf2_exact(Bt)[0] if n <= cfg.exact_cap else math.nan
    c = cfg.c_ref if cfg.c_ref is not None else math.inf
    return SymmetrizationRecord(i, seed_value(ss), rescaled, upper, lower, exact,
                                upper / n, upper <= c * n)


def condition_rows(B: np.ndarray) -> tuple[np.ndarray, int]:
    """Rescale rows so that ``||row|| <= sqrt(n)`` and ``|sum(row)| <= sqrt(n)``."""
    n = B.shape[1]
    root = math.sqrt(n)
    norms = np.linalg.norm(B, axis=1)
    sums = np.abs(B.sum(axis=1))
    with np.errstate(divide="ignore"):
        f = np.minimum(1.0, np.minimum(root / norms, root / sums))
    return B * f[:, None], int(np.sum(f < 1.0))


def _normal_lcd_trial(cfg: ExperimentConfig, i: int) -> NormalLcdRecord:
    ss = trial_seed(cfg.seed, i)
    rng = np.random.default_rng(ss)
    n = cfg.n
    if cfg.planted:
        Ap = planted_flat_rows(n, rng)
    else:
        Ap = cfg.distribution.sample(rng, (n - 1, n))
    x = unit_normal(Ap, seed=rng)
    comp = is_compressible(x, cfg.sphere)
    prm = normal_lcd_params(cfg)
    res = lcd(x, prm)
    t = res.t_star if res.t_star is not None else math.nan
    return NormalLcdRecord(i, seed_value(ss), comp, res.censored, t, res.lower_bound,
                           res.lower_bound / math.sqrt(n))


def normal_lcd_params(cfg: ExperimentConfig) -> LcdParams:
    n = cfg.n
    h = cfg.h if cfg.h is not None else cfg.s * math.sqrt(n)
    t_max = cfg.t_max if cfg.t_max is not None else cfg.t_max_factor * math.sqrt(n)
    return LcdParams(h=h, r=cfg.lcd_r, t_max=t_max)


def planted_flat_rows(n: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian ``(n-1) x n`` matrix whose rows are orthogonal to ``(1, ..., 1)``."""
    G = rng.standard_normal((n - 1, n))
    return G - G.mean(axis=1, keepdims=True)


def _distance_trial(cfg: ExperimentConfig, i: int) -> DistanceRecord:
    ss = trial_seed(cfg.seed, i)
    rng = np.random.default_rng(ss)
    n = cfg.n
    A = cfg.distribution.sample(rng, (n, n))
    s, v = smin_with_vector(A)
    incomp = not is_compressible(v, cfg.sphere)
    H = A[:, : n - 1]
    x_star = unit_normal(H.T, seed=rng)
    d = abs(float(x_star @ A[:, n - 1]))
    check = distance_to_span(A[:, n - 1], H)
    if abs(d - check) > 1e-8 * max(1.0, check):
        raise NumericalError(f"normal projection {d} disagrees with distance {check}")
    return DistanceRecord(i, seed_value(ss), s, incomp, d, check)


# -- running ---------------------------------------------------------------------------


def _call(args):
    fn, cfg, i = args
    with threadpool_limits(1):
        return fn(cfg, i)


def run_trials(fn: Callable, cfg: ExperimentConfig, jobs: int = 1) -> list:
    """Records for trials ``0..trials-1`` in index order.

    BLAS is held to one thread inside every trial so that results are
    bit-identical whatever the worker count.
    """
    tasks = [(fn, cfg, i) for i in range(cfg.trials)]
    if jobs <= 1 or cfg.trials == 1:
        return [_call(t) for t in tasks]
    chunk = max(1, cfg.trials // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_call, tasks, chunksize=chunk))


def records_csv(records: Sequence, record_type=None) -> str:
    record_type = record_type or type(records[0])
    names = [f.name for f in fields(record_type)]
    return csv_text(names, ([getattr(r, k) for k in names] for r in records))


def columns(records: Sequence, record_type) -> dict:
    names = [f.name for f in fields(record_type)]
    return {k: np.array([getattr(r, k) for r in records]) for k in names}


# -- summaries -------------------------------------------------------------------------


@dataclass
class SmallBallFit:
    eps: np.ndarray
    p: np.ndarray
    se: np.ndarray
    L_hat: float
    residuals: np.ndarray
    trials: int

    @property
    def rms_residual(self) -> float:
        return float(np.sqrt(np.mean(self.residuals ** 2)))

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.p) >= 0))

    @property
    def covered(self) -> np.ndarray:
        """Points within ``2 se + rms residual`` of the fitted line."""
        return np.abs(self.residuals) <= 2.0 * self.se + self.rms_residual


def small_ball_fit(scaled: np.ndarray, eps: Sequence[float], fit_max: float = 0.5) -> SmallBallFit:
    """Empirical ``P{s_n sqrt(n) <= eps}`` and a least-squares line through 0."""
    scaled = np.asarray(scaled, dtype=float)
    scaled = scaled[np.isfinite(scaled)]
    eps = np.asarray(eps, dtype=float)
    trials = scaled.size
    p = np.array([np.mean(scaled <= e) for e in eps]) if trials else np.full(eps.size, math.nan)
    se = binom_se(p, max(trials, 1))
    sel = eps <= fit_max + 1e-12
    L_hat = float(np.dot(eps[sel], p[sel]) / np.dot(eps[sel], eps[sel])) if sel.any() else math.nan
    return SmallBallFit(eps, p, se, L_hat, p - L_hat * eps, trials)


def _eps_key(e: float) -> str:
    return f"{e:g}"


def summarize_smin(cols: dict, cfg: ExperimentConfig) -> list:
    fit = small_ball_fit(cols["scaled"], cfg.eps)
    out = [("experiment", "smin"), ("dist", cfg.dist), ("n", cfg.n), ("trials", len(cols["trial"])),
           ("failures", int(np.sum(cols["status"] != "ok")))]
    for e, p, se, ok in zip(fit.eps, fit.p, fit.se, fit.covered):
        out += [(f"p@{_eps_key(e)}", float(p)), (f"se@{_eps_key(e)}", float(se)),
                (f"covered@{_eps_key(e)}", bool(ok))]
    out += [("L_hat", fit.L_hat), ("rms_residual", fit.rms_residual),
            ("monotone", fit.monotone), ("all_covered", bool(fit.covered.all()))]
    if cfg.dist in ("gaussian", "normal"):
        ref = 1.0 - math.exp(-0.01 / 2.0 - 0.1)
        out.append(("gaussian_limit@0.1", ref))
    return out


def summarize_regularizer(cols: dict, cfg: ExperimentConfig) -> list:
    t = len(cols["trial"])
    freq = float(np.mean(cols["success"]))
    floor = 1.0 - 4.0 * math.exp(-cfg.delta * cfg.n / 8.0)
    se = float(binom_se(freq, t))
    return [
        ("experiment", "regularize"), ("dist", cfg.dist), ("n", cfg.n), ("delta", cfg.delta),
        ("trials", t), ("c_ref", cfg.c_ref), ("success_frequency", freq), ("se", se),
        ("det_frequency", float(np.mean(cols["det_ok"]))), ("floor", floor),
        ("meets_floor", bool(freq >= floor - 2.0 * se)),
        ("scaled_upper_p50", float(np.quantile(cols["scaled_upper"], 0.5))),
        ("scaled_upper_p99", float(np.quantile(cols["scaled_upper"], 0.99))),
        ("lower_le_upper", bool(np.all(cols["inf2_lower"] <= cols["inf2_upper"] * (1 + 1e-12)))),
        ("grid_det_vs_pre", bool(np.all(cols["logdet"] >= 2.0 * cols["logdet_pre"] - 1e-9))),
    ]


def summarize_covering(cols: dict, cfg: ExperimentConfig) -> list:
    ratio = cols["ratio"]
    return [
        ("experiment", "cover"), ("dist", cfg.dist), ("n", cfg.n), ("delta", cfg.delta),
        ("trials", len(cols["trial"])),
        ("located", int(np.sum(cols["located"]))), ("contained", int(np.sum(cols["contained"]))),
        ("ratio_p50", float(np.quantile(ratio, 0.5))), ("ratio_p95", float(np.quantile(ratio, 0.95))),
        ("exact_checks", len(cols["trial"])),
        ("exact_within", int(np.sum(cols["exact_diameter"] <= 2.0 * cols["exact_certificate"] * (1 + 1e-12)))),
    ]


def summarize_symmetrization(cols: dict, cfg: ExperimentConfig) -> list:
    t = len(cols["trial"])
    out = [("experiment", "symmetrize"), ("dist", cfg.dist), ("n", cfg.n), ("trials", t),
           ("c", cfg.c_ref), ("rescaled_rows_mean", float(np.mean(cols["rescaled_rows"]))),
           ("ratio_upper_p99", float(np.quantile(cols["ratio_upper"], 0.99))),
           ("within_frequency", float(np.mean(cols["within"]))),
           ("within_se", float(binom_se(np.mean(cols["within"]), t)))]
    exact = cols["inf2_exact"].astype(float)
    if np.all(np.isfinite(exact)):
        out.append(("exact_ratio_p99", float(np.quantile(exact / cfg.n, 0.99))))
    return out


def summarize_normal_lcd(cols: dict, cfg: ExperimentConfig) -> list:
    t = len(cols["trial"])
    cens = float(np.mean(cols["censored"]))
    prm = normal_lcd_params(cfg)
    return [
        ("experiment", "normal-lcd"), ("dist", cfg.dist), ("n", cfg.n), ("trials", t),
        ("planted", cfg.planted), ("r", prm.r), ("h", prm.h), ("t_max", prm.t_max),
        ("censored_fraction", cens), ("censored_se", float(binom_se(cens, t))),
        ("comp_fraction", float(np.mean(cols["compressible"]))),
        ("lower_scaled_min", float(np.min(cols["lower_scaled"]))),
        ("lower_scaled_p50", float(np.quantile(cols["lower_scaled"], 0.5))),
    ]


def distance_table(cols: dict, cfg: ExperimentConfig):
    """Per-eps (left, right, pooled se, holds) for the distance reduction."""
    t = len(cols["trial"])
    n, theta, rho = cfg.n, cfg.theta, cfg.rho
    rows = []
    for e in cfg.eps:
        left = float(np.mean((cols["smin"] < e * rho / math.sqrt(n)) & cols["incompressible"]))
        q = float(np.mean(cols["distance"] < e))
        right = q / theta
        se = math.sqrt(left * (1 - left) / t + (q * (1 - q) / t) / theta ** 2)
        rows.append((e, left, right, se, left <= right + 2.0 * se))
    return rows


def summarize_distance(cols: dict, cfg: ExperimentConfig) -> list:
    out = [("experiment", "distance"), ("dist", cfg.dist), ("n", cfg.n), ("theta", cfg.theta),
           ("rho", cfg.rho), ("trials", len(cols["trial"]))]
    ok = True
    for e, left, right, se, holds in distance_table(cols, cfg):
        k = _eps_key(e)
        out += [(f"left@{k}", left), (f"right@{k}", right), (f"se@{k}", se), (f"holds@{k}", holds)]
        ok &= holds
    out.append(("all_hold", ok))
    return out


@dataclass(frozen=True)
class Experiment:
    name: str
    trial: Callable
    record: type
    summarize: Callable


EXPERIMENTS = {
    "smin": Experiment("smin", _smin_trial, SminRecord, summarize_smin),
    "regularize": Experiment("regularize", _regularizer_trial, RegularizerRecord, summarize_regularizer),
    "cover": Experiment("cover", _covering_trial, CoveringRecord, summarize_covering),
    "symmetrize": Experiment("symmetrize", _symmetrize_trial, SymmetrizationRecord, summarize_symmetrization),
    "normal-lcd": Experiment("normal-lcd", _normal_lcd_trial, NormalLcdRecord, summarize_normal_lcd),
    "distance": Experiment("distance", _distance_trial, DistanceRecord, summarize_distance),
}


@dataclass
class RunResult:
    experiment: str
    config: ExperimentConfig
    records: list
    summary: list

    @property
    def csv(self) -> str:
        return records_csv(self.records, EXPERIMENTS[self.experiment].record)

    def summary_dict(self) -> dict:
        return dict(self.summary)


def prepare_config(name: str, cfg: ExperimentConfig, jobs: int = 1) -> ExperimentConfig:
    """Fill calibrated constants that the trials depend on."""
    if name == "regularize" and cfg.c_ref is None:
        cfg = replace(cfg, c_ref=resolve_c_ref(cfg, jobs))
    if name == "symmetrize" and cfg.c_ref is None:
        cal = replace(cfg, seed=CALIBRATION_SEED, trials=cfg.calibration_trials, c_ref=math.inf)
        recs = run_trials(_symmetrize_trial, cal, jobs)
        cfg = replace(cfg, c_ref=float(np.quantile([r.ratio_upper for r in recs], 0.99)))
    return cfg


def run_experiment(name: str, cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    exp = EXPERIMENTS[name]
    cfg = prepare_config(name, cfg, jobs)
    records = run_trials(exp.trial, cfg, jobs)
    return RunResult(name, cfg, records, exp.summarize(columns(records, exp.record), cfg))


def run_smin_mc(cfg: ExperimentConfig, jobs: int = 1) -> tuple[list, SmallBallFit]:
    res = run_experiment("smin", cfg, jobs)
    return res.records, small_ball_fit([r.scaled for r in res.records], cfg.eps)


def run_regularizer_mc(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    return run_experiment("regularize", cfg, jobs)


def run_covering_mc(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    return run_experiment("cover", cfg, jobs)


def run_symmetrization_mc(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    return run_experiment("symmetrize", cfg, jobs)


def run_normal_lcd_mc(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    return run_experiment("normal-lcd", cfg, jobs)


def run_distance_bound_check(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    return run_experiment("distance", cfg, jobs)


# -- single-vector experiments -----------------------------------------------------------


def tensorization_pair(vt: float, ut: float, rogozin_c: float = 1.0) -> tuple[float, float]:
    """``(v, u)`` with ``P{||A y|| <= v sqrt(n)} <= u^n`` from a concentration pair.

    First ``v' = vt sqrt(1-ut) / (2C)`` and ``u' = max(1/2, ut)`` bound every
    row sum; then at least ``(1-u')n`` rows exceed ``v'`` in expectation and a
    Chernoff bound gives ``v = v' sqrt((1-u')/2)``, ``u = exp(-(1-u')/8)``.
    ``C`` is the unnamed constant of the anti-concentration inequality.
    """
    v1 = vt * math.sqrt(1.0 - ut) / (2.0 * rogozin_c)
    u1 = max(0.5, ut)
    return v1 * math.sqrt((1.0 - u1) / 2.0), math.exp(-(1.0 - u1) / 8.0)


@dataclass
class TensorizationReport:
    n: int
    trials: int
    v: float
    u: float
    hits: int
    frequency: float
    implied_bound: float


def run_tensorization_check(dist: EntryDistribution, n: int, y, trials: int, seed: int = 0,
                            v: Optional[float] = None, rogozin_c: float = 1.0) -> TensorizationReport:
    """Frequency of ``||A y|| <= v sqrt(n)`` against the implied ``u^n``."""
    y = np.asarray(y, dtype=float)
    lp = levy_params(dist, seed=seed)
    v_d, u = tensorization_pair(lp.v, lp.u, rogozin_c)
    v = v if v is not None else v_d
    hits = 0
    with threadpool_limits(1):
        for i in range(trials):
            rng = np.random.default_rng(trial_seed(seed, i))
            A = dist.sample(rng, (n, n))
            hits += bool(np.linalg.norm(A @ y) <= v * math.sqrt(n))
    return TensorizationReport(n, trials, v, u, hits, hits / trials, u ** n)


@dataclass
class SmallBallProfile:
    eps: np.ndarray
    concentration: np.ndarray
    shape: np.ndarray
    in_range: np.ndarray
    C: float
    v: float
    u: float
    lcd_lower: float
    lcd_upper: float


def run_small_ball_profile(x, dist: EntryDistribution, lcd_params: LcdParams, trials: int,
                           eps: Sequence[float], seed: int = 0) -> SmallBallProfile:
    """Empirical ``L(sum x_i xi_i, eps v)`` against ``eps / (r sqrt(1-u)) + exp(-2(1-u)h^2)``.

    Only ``eps >= 1 / (certified LCD lower bound)`` is inside the bound's valid
    range; the constant ``C`` is the smallest that makes the bound hold there.
    """
    x = np.asarray(x, dtype=float)
    lp = levy_params(dist, seed=seed)
    res = lcd(x, lcd_params)
    lo = res.lower_bound
    hi = math.inf if res.censored else res.t_star
    rng = np.random.default_rng(trial_seed(seed, 1))
    S = dist.sample(rng, (trials, x.size)) @ x
    eps = np.asarray(eps, dtype=float)
    conc = np.array([levy_concentration(S, e * lp.v)[0] for e in eps])
    r, h, u = lcd_params.r, lcd_params.h, lp.u
    shape = eps / (r * math.sqrt(1.0 - u)) + math.exp(-2.0 * (1.0 - u) * h * h)
    in_range = eps >= 1.0 / lo
    C = float(np.max(conc[in_range] / shape[in_range])) if in_range.any() else math.nan
    return SmallBallProfile(eps, conc, shape, in_range, C, lp.v, lp.u, lo, hi)


def default_jobs() -> int:
    return os.cpu_count() or 1
