"""Entry laws for random matrices: samplers, dyadic quantile levels and
Levy concentration estimates.

Every law is normalized to mean 0 and variance 1.  The raw variable ``X``
is drawn from the family and mapped to ``(X - shift) / scale``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from scipy import stats

from .errors import NoValidPairError, ParameterError, ResolutionError

SeedLike = Union[int, np.random.Generator, None]

DEFAULT_SMOOTHING = 1e-6

_ALIASES = {
    "gaussian": "gaussian",
    "normal": "gaussian",
    "rademacher": "rademacher",
    "uniform-symmetric": "uniform-symmetric",
    "uniform": "uniform-symmetric",
    "student-t": "student-t",
    "t": "student-t",
    "symmetrized-pareto": "symmetrized-pareto",
    "pareto": "symmetrized-pareto",
    "centered-lognormal": "centered-lognormal",
    "lognormal": "centered-lognormal",
    "two-point-sparse": "two-point-sparse",
    "two-point": "two-point-sparse",
    "empirical": "empirical",
}

_N_PARAMS = {
    "gaussian": 0,
    "rademacher": 0,
    "uniform-symmetric": 0,
    "student-t": 1,
    "symmetrized-pareto": 1,
    "centered-lognormal": 1,
    "two-point-sparse": 1,
    "empirical": 0,
}

ATOMIC_FAMILIES = frozenset({"rademacher", "two-point-sparse", "empirical"})


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class EntryDistribution:
    """A mean-zero, unit-variance entry law.

    ``smoothing`` is the width of the uniform perturbation added to ``|x|``
    before quantile levels are computed for atomic laws; it never touches
    the samples themselves.
    """

    family: str
    params: tuple = ()
    smoothing: float = DEFAULT_SMOOTHING
    data: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    shift: float = field(init=False)
    scale: float = field(init=False)

    def __post_init__(self):
        family = _ALIASES.get(self.family)
        if family is None:
            raise ParameterError(f"unknown distribution family {self.family!r}")
        object.__setattr__(self, "family", family)
        params = tuple(float(p) for p in self.params)
        if len(params) != _N_PARAMS[family]:
            raise ParameterError(
                f"{family} takes {_N_PARAMS[family]} parameter(s), got {len(params)}"
            )
        object.__setattr__(self, "params", params)
        if not self.smoothing >= 0:
            raise ParameterError("smoothing width must be >= 0")
        shift, scale = self._normalization()
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "scale", scale)

    def _normalization(self) -> tuple[float, float]:
        f, p = self.family, self.params
        if f in ("gaussian", "rademacher"):
            return 0.0, 1.0
        if f == "uniform-symmetric":
            # raw U[-1, 1] has variance 1/3
            return 0.0, 1.0 / math.sqrt(3.0)
        if f == "student-t":
            df = p[0]
            if not df > 2:
                raise ParameterError(f"student-t needs df > 2, got {df}")
            return 0.0, math.sqrt(df / (df - 2.0))
        if f == "symmetrized-pareto":
            a = p[0]
            if not a > 2:
                raise ParameterError(f"pareto needs tail index > 2, got {a}")
            # raw = sign * P, P{P > x} = x^-a on [1, inf), E P^2 = a / (a - 2)
            return 0.0, math.sqrt(a / (a - 2.0))
        if f == "centered-lognormal":
            s = p[0]
            if not s > 0:
                raise ParameterError(f"lognormal needs sigma > 0, got {s}")
            s2 = s * s
            return math.exp(s2 / 2.0), math.sqrt(math.expm1(s2) * math.exp(s2))
        if f == "two-point-sparse":
            q = p[0]
            if not 0 < q < 1:
                raise ParameterError(f"two-point needs p in (0, 1), got {q}")
            return q, math.sqrt(q * (1.0 - q))
        # empirical
        if self.data is None or len(self.data) == 0:
            raise ParameterError("empirical family needs a non-empty sample set")
        data = np.asarray(self.data, dtype=float)
        if not np.all(np.isfinite(data)):
            raise ParameterError("empirical sample set contains non-finite values")
        sd = float(data.std())
        if not sd > 0:
            raise ParameterError("empirical sample set is constant")
        return float(data.mean()), sd

    # -- descriptive helpers -------------------------------------------------

    @property
    def spec(self) -> str:
        """CLI spec string; round-trips through :func:`parse_distribution`
        for every family except ``empirical``."""
        if not self.params:
            return self.family
        return self.family + ":" + ",".join(repr(p) for p in self.params)

    @property
    def is_atomic(self) -> bool:
        return self.family in ATOMIC_FAMILIES

    @property
    def is_analytic(self) -> bool:
        return self.family != "empirical"

    # -- sampling ------------------------------------------------------------

    def _raw(self, rng: np.random.Generator, size) -> np.ndarray:
        f, p = self.family, self.params
        if f == "gaussian":
            return rng.standard_normal(size)
        if f == "rademacher":
            return 2.0 * rng.integers(0, 2, size=size) - 1.0
        if f == "uniform-symmetric":
            return rng.uniform(-1.0, 1.0, size)
        if f == "student-t":
            return rng.standard_t(p[0], size)
        if f == "symmetrized-pareto":
            sign = 2.0 * rng.integers(0, 2, size=size) - 1.0
            return sign * (1.0 + rng.pareto(p[0], size))
        if f == "centered-lognormal":
            return np.exp(p[0] * rng.standard_normal(size))
        if f == "two-point-sparse":
            return (rng.random(size) < p[0]).astype(float)
        return rng.choice(np.asarray(self.data, dtype=float), size=size)

    def sample(self, rng: SeedLike, size) -> np.ndarray:
        rng = as_generator(rng)
        return (self._raw(rng, size) - self.shift) / self.scale

    # -- law of |x| (smoothed for atomic families) ----------------------------

    def _atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Support points of |x| and their probabilities (atomic laws)."""
        if self.family == "rademacher":
            return np.array([1.0]), np.array([1.0])
        if self.family == "two-point-sparse":
            q = self.params[0]
            return (
                np.array([(1.0 - q) / self.scale, q / self.scale]),
                np.array([q, 1.0 - q]),
            )
        values, counts = np.unique(
            np.abs((np.asarray(self.data, dtype=float) - self.shift) / self.scale),
            return_counts=True,
        )
        return values, counts / counts.sum()

    def abs_sf(self, t: float) -> float:
        """P{|x| (+ smoothing) >= t}."""
        f, p, sc = self.family, self.params, self.scale
        if t <= 0:
            return 1.0
        if f == "gaussian":
            return float(2.0 * stats.norm.sf(t))
        if f == "uniform-symmetric":
            return float(min(1.0, max(0.0, 1.0 - t * sc)))
        if f == "student-t":
            return float(2.0 * stats.t.sf(t * sc, p[0]))
        if f == "symmetrized-pareto":
            return float(min(1.0, (t * sc) ** (-p[0])))
        if f == "centered-lognormal":
            m = self.shift
            upper = stats.lognorm.sf(m + t * sc, p[0])
            lower = stats.lognorm.cdf(m - t * sc, p[0]) if m - t * sc > 0 else 0.0
            return float(upper + lower)
        values, probs = self._atoms()
        w = self.smoothing
        if w == 0:
            return float(probs[values >= t].sum())
        return float(np.sum(probs * np.clip((values + w - t) / w, 0.0, 1.0)))

    def abs_isf(self, q: float) -> float:
        """Smallest t >= 0 with P{|x| (+ smoothing) >= t} = q, for q in (0, 1]."""
        if not 0 < q <= 1:
            raise ParameterError(f"tail probability must lie in (0, 1], got {q}")
        f, p, sc = self.family, self.params, self.scale
        if f == "gaussian":
            return 0.0 if q == 1 else float(stats.norm.isf(q / 2.0))
        if f == "uniform-symmetric":
            return (1.0 - q) / sc
        if f == "student-t":
            return 0.0 if q == 1 else float(stats.t.isf(q / 2.0, p[0]) / sc)
        if f == "symmetrized-pareto":
            return q ** (-1.0 / p[0]) / sc
        if self.is_atomic and self.smoothing == 0:
            raise ParameterError(
                f"{f} is atomic; levels need a positive smoothing width"
            )
        if f == "rademacher":
            return 1.0 + self.smoothing * (1.0 - q)
        if f == "centered-lognormal":
            hi = 1.0
            while self.abs_sf(hi) > q:
                hi *= 2.0
            return _first_crossing(self.abs_sf, q, 0.0, hi)
        values, _ = self._atoms()
        return _first_crossing(self.abs_sf, q, 0.0, float(values.max()) + self.smoothing)


def _first_crossing(sf: Callable[[float], float], q: float, lo: float, hi: float) -> float:
    """inf{t in [lo, hi] : sf(t) <= q} for a continuous nonincreasing sf."""
    if sf(lo) <= q:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if sf(mid) <= q:
            hi = mid
        else:
            lo = mid
    return hi


def parse_distribution(spec: str, smoothing: float = DEFAULT_SMOOTHING) -> EntryDistribution:
    """Parse ``family[:param[,param]]``; ``empirical:<path>`` loads a
    newline-delimited file of reals."""
    family, _, rest = spec.strip().partition(":")
    family = family.strip().lower()
    if _ALIASES.get(family) == "empirical":
        if not rest:
            raise ParameterError("empirical family needs a file path: empirical:<path>")
        return EntryDistribution("empirical", (), smoothing, load_samples(rest))
    try:
        params = tuple(float(v) for v in rest.split(",")) if rest else ()
    except ValueError as exc:
        raise ParameterError(f"bad parameters in distribution spec {spec!r}") from exc
    return EntryDistribution(family, params, smoothing)


def load_samples(path: Union[str, Path]) -> np.ndarray:
    values = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            values.append(float(line))
    return np.array(values, dtype=float)


def sample(dist: EntryDistribution, seed: SeedLike, count: int) -> np.ndarray:
    """``count`` i.i.d. draws of the normalized law."""
    if count < 1:
        raise ParameterError("count must be >= 1")
    return dist.sample(seed, count)


# -- dyadic levels -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LevelSequence:
    """Levels tau_0 <= ... <= tau_K with P{xi >= tau_k} = 2^-k."""

    values: np.ndarray
    source: str
    p_moment: float = 1.0

    @property
    def K(self) -> int:
        return len(self.values) - 1

    def truncated_sum(self) -> float:
        """sum_{k<=K} 2^{-k-1} tau_k, a lower bound for E xi."""
        k = np.arange(len(self.values))
        return float(np.sum(np.ldexp(self.values, -k - 1)))


def levels_from_isf(isf: Callable[[float], float], K: int, p_moment: float = 1.0,
                    source: str = "analytic-inverse-cdf") -> LevelSequence:
    """Levels from the inverse survival function of ``|x|``; each value is
    raised to ``p_moment``."""
    if K < 1:
        raise ParameterError("K must be >= 1")
    vals = np.array([isf(math.ldexp(1.0, -k)) for k in range(K + 1)], dtype=float)
    vals = np.maximum.accumulate(vals ** p_moment)
    return LevelSequence(vals, source, p_moment)


def empirical_levels(xi: np.ndarray, K: int, p_moment: float = 1.0) -> LevelSequence:
    """Lower empirical quantiles of samples of the (already transformed) xi."""
    if K < 1:
        raise ParameterError("K must be >= 1")
    xi = np.sort(np.asarray(xi, dtype=float))
    N = len(xi)
    if math.ldexp(N, -K) < 32:
        raise ResolutionError(
            f"{N} samples cannot resolve level K={K} (need 2^-K * N >= 32)"
        )
    idx = [int(math.floor(N * (1.0 - math.ldexp(1.0, -k)))) for k in range(K + 1)]
    return LevelSequence(xi[idx], "empirical-quantile", p_moment)


def levels(dist: EntryDistribution, p_moment: float, K: int, *,
           n_samples: Optional[int] = None, seed: SeedLike = 0) -> LevelSequence:
    """Levels of ``xi = |x|^p_moment`` for ``x ~ dist``.

    Closed-form families are inverted exactly; the empirical family uses
    lower quantiles of ``max(10**6, 2**(K+6))`` smoothed draws unless
    ``n_samples`` is given.
    """
    if p_moment < 1:
        raise ParameterError("p_moment must be >= 1")
    if dist.is_analytic:
        return levels_from_isf(dist.abs_isf, K, p_moment)
    N = n_samples if n_samples is not None else max(10**6, 2 ** (K + 6))
    rng = as_generator(seed)
    x = np.abs(dist.sample(rng, N)) + dist.smoothing * rng.random(N)
    return empirical_levels(x ** p_moment, K, p_moment)


# -- Levy concentration ---------------------------------------------------------


def levy_concentration(samples: np.ndarray, z: float) -> tuple[float, float]:
    """Empirical sup_lambda P{|xi - lambda| <= z} and a maximizing lambda.

    Sort plus a two-pointer sweep (vectorized with ``searchsorted``).
    """
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ParameterError("levy_concentration needs at least one sample")
    if z < 0:
        raise ParameterError("z must be >= 0")
    right = np.searchsorted(s, s + 2.0 * z, side="right")
    counts = right - np.arange(s.size)
    i = int(np.argmax(counts))
    return counts[i] / s.size, float(s[i] + z)


@dataclass(frozen=True)
class LevyParams:
    v: float
    u: float
    estimate: float
    margin: float


def levy_params_from_samples(samples: np.ndarray, v: Optional[float] = None,
                             target: float = 0.9, max_halvings: int = 40) -> LevyParams:
    """Certify a pair (v, u) with empirical L(xi, v) <= u - margin.

    Without ``v`` the largest v in {2^-j} whose estimate is <= ``target``
    is chosen.
    """
    samples = np.asarray(samples, dtype=float)
    N = samples.size
    margin = 3.0 / math.sqrt(N)
    candidates = [v] if v is not None else [math.ldexp(1.0, -j) for j in range(max_halvings + 1)]
    for cand in candidates:
        est, _ = levy_concentration(samples, cand)
        if (v is not None or est <= target) and est + margin < 1.0:
            return LevyParams(cand, est + margin, est, margin)
    raise NoValidPairError(
        "no anti-concentration pair found: input is (near-)constant at this resolution"
    )


def levy_params(dist: EntryDistribution, confidence_samples: int = 10**5,
                seed: SeedLike = 0, v: Optional[float] = None) -> LevyParams:
    return levy_params_from_samples(dist.sample(seed, confidence_samples), v=v)
