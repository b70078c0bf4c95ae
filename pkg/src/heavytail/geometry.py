"""Sphere geometry: compressible vectors, spread coordinates, LCD and lattice nets."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Optional

import numpy as np

from .distributions import SeedLike, as_generator
from .errors import (
    BudgetError,
    DomainError,
    IndeterminateError,
    InvariantViolation,
    ParameterError,
    ShapeError,
)

UNIT_TOL = 1e-10


def _unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 1:
        raise ShapeError("empty vector")
    if not np.all(np.isfinite(x)):
        raise DomainError("vector has non-finite entries")
    norm = float(np.linalg.norm(x))
    if abs(norm - 1.0) > UNIT_TOL:
        raise DomainError(f"expected a unit vector, got norm {norm:.12g}")
    return x


@dataclass(frozen=True)
class SphereParams:
    theta: float
    rho: float

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ParameterError(f"theta must lie in (0, 1), got {self.theta}")
        if not 0 < self.rho < 1:
            raise ParameterError(f"rho must lie in (0, 1), got {self.rho}")

    def sparsity(self, n: int) -> int:
        return int(math.floor(self.theta * n + 1e-9))

    @property
    def lcd_r(self) -> float:
        """``r`` under which incompressible vectors have LCD of order sqrt(n)."""
        return 0.5 * self.rho ** 2 * math.sqrt(self.theta)

    @property
    def lcd_q(self) -> float:
        return math.sqrt(self.theta) / 3.0


def sparse_distance(x, theta: float) -> float:
    """Distance from unit ``x`` to the floor(theta n)-sparse vectors."""
    x = _unit(x)
    k = int(math.floor(theta * x.size + 1e-9))
    if k >= x.size:
        return 0.0
    sq = np.sort(x * x)
    return float(math.sqrt(math.fsum(sq[: x.size - k])))


def is_compressible(x, params: SphereParams) -> bool:
    return sparse_distance(x, params.theta) <= params.rho


def classify(x, params: SphereParams) -> str:
    """``"Comp"`` or ``"Incomp"``; distance exactly rho counts as Comp."""
    return "Comp" if is_compressible(x, params) else "Incomp"


def spread_set(x, params: SphereParams) -> np.ndarray:
    """Indices with ``rho / sqrt(2n) <= |x_i| <= 1 / sqrt(theta n)``."""
    x = _unit(x)
    n = x.size
    a = np.abs(x)
    sigma = np.flatnonzero((a >= params.rho / math.sqrt(2.0 * n)) & (a <= 1.0 / math.sqrt(params.theta * n)))
    if not is_compressible(x, params) and sigma.size < 0.5 * params.rho ** 2 * params.theta * n - 1e-9:
        raise InvariantViolation(
            f"incompressible vector has only {sigma.size} spread coordinates"
        )
    return sigma


# -- compressible nets ---------------------------------------------------------------


def sphere_packing(dim: int, radius: float, rng: SeedLike = None, patience: int = 2000) -> np.ndarray:
    """Greedy ``radius``-separated set on ``S^{dim-1}``.

    Starts from the signed basis vectors, then keeps random points farther
    than ``radius`` from everything kept, stopping after ``patience``
    consecutive rejections.
    """
    rng = as_generator(rng)
    eye = np.eye(dim)
    pts = np.concatenate([eye, -eye])
    misses = 0
    while misses < patience:
        g = rng.standard_normal((256, dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        for y in g:
            if np.min(np.linalg.norm(pts - y, axis=1)) > radius:
                pts = np.vstack([pts, y])
                misses = 0
            else:
                misses += 1
                if misses >= patience:
                    break
    return pts


def comp_net_bound_log(n: int, params: SphereParams) -> float:
    """log of ``(e/theta)^{theta n} (5/rho)^{theta n}``."""
    tn = params.theta * n
    return tn * (math.log(math.e / params.theta) + math.log(5.0 / params.rho))


class CompNet:
    """Net on the compressible vectors: sub-sphere nets on every support.

    Points are produced lazily; ``nearest`` goes straight to the support of
    the largest coordinates, so the net never has to be materialized.
    """

    def __init__(self, n: int, params: SphereParams, seed: SeedLike = 0,
                 budget: int = 10**6, patience: int = 2000):
        self.n = n
        self.params = params
        self.s = params.sparsity(n)
        if self.s < 1:
            raise ParameterError("theta n < 1: the compressible set is empty")
        self.sub = sphere_packing(self.s, params.rho, seed, patience)
        self.budget = budget

    @property
    def n_supports(self) -> int:
        return math.comb(self.n, self.s)

    def __len__(self) -> int:
        return self.n_supports * len(self.sub)

    def points(self) -> np.ndarray:
        if len(self) > self.budget:
            raise BudgetError(
                f"exhaustive net has {len(self)} points, over budget {self.budget}; use the sampled mode"
            )
        if math.log(len(self)) > comp_net_bound_log(self.n, self.params) + 1e-9:
            raise InvariantViolation("compressible net exceeds its cardinality bound")
        out = np.zeros((len(self), self.n))
        m = len(self.sub)
        for j, supp in enumerate(combinations(range(self.n), self.s)):
            out[j * m:(j + 1) * m, list(supp)] = self.sub
        return out

    def nearest(self, x) -> np.ndarray:
        x = _unit(x)
        supp = np.sort(np.argsort(-np.abs(x), kind="stable")[: self.s])
        y = x[supp]
        ny = np.linalg.norm(y)
        y = y / ny if ny > 0 else np.eye(self.s)[0]
        j = int(np.argmin(np.linalg.norm(self.sub - y, axis=1)))
        out = np.zeros(self.n)
        out[supp] = self.sub[j]
        return out


def comp_net(n: int, params: SphereParams, seed: SeedLike = 0, budget: int = 10**6) -> CompNet:
    return CompNet(n, params, seed, budget)


def sample_compressible(n: int, params: SphereParams, rng: SeedLike, count: int) -> np.ndarray:
    """Random compressible unit vectors: a sparse unit vector plus a small push."""
    rng = as_generator(rng)
    s = params.sparsity(n)
    out = []
    while len(out) < count:
        y = np.zeros(n)
        supp = rng.choice(n, size=s, replace=False)
        y[supp] = rng.standard_normal(s)
        y /= np.linalg.norm(y)
        z = rng.standard_normal(n)
        z *= rng.uniform(0.0, params.rho) / np.linalg.norm(z)
        x = y + z
        x /= np.linalg.norm(x)
        if is_compressible(x, params):
            out.append(x)
    return np.array(out)


def sample_incompressible(n: int, params: SphereParams, rng: SeedLike, count: int) -> np.ndarray:
    """Incompressible unit vectors from a mixture of shapes, Comp draws rejected.

    Shapes: gaussian; flat signs with noise; small-integer vectors; a sparse
    bump on a gaussian floor.  The integer and flat shapes carry arithmetic
    structure, so they probe small LCD.
    """
    rng = as_generator(rng)
    out = []
    kind = 0
    while len(out) < count:
        if kind == 0:
            x = rng.standard_normal(n)
        elif kind == 1:
            x = rng.choice([-1.0, 1.0], n) + 0.05 * rng.standard_normal(n)
        elif kind == 2:
            x = rng.integers(-2, 3, n).astype(float)
        else:
            x = 0.4 * rng.standard_normal(n)
            x[rng.choice(n, size=max(1, n // 10), replace=False)] += 3.0
        kind = (kind + 1) % 4
        nx = np.linalg.norm(x)
        if nx == 0:
            continue
        x = x / nx
        if not is_compressible(x, params):
            out.append(x)
    return np.array(out)


# -- essential LCD -------------------------------------------------------------------


@dataclass(frozen=True)
class LcdParams:
    h: float
    r: float
    t_max: float
    step: Optional[float] = None
    tol: float = 1e-9
    max_evals: int = 10**7

    def __post_init__(self):
        if not self.h > 0:
            raise ParameterError("h must be > 0")
        if not 0 < self.r < 1:
            raise ParameterError("r must lie in (0, 1)")
        if not self.t_max > 0:
            raise ParameterError("t_max must be > 0")
        if self.step is not None and not 0 < self.step <= min(self.r, 1.0) / 8.0 * (1 + 1e-12):
            raise ParameterError("coarse step must lie in (0, min(r, 1)/8]")
        if not self.tol > 0:
            raise ParameterError("tol must be > 0")

    @property
    def coarse_step(self) -> float:
        return self.step if self.step is not None else min(self.r, 1.0) / 8.0


@dataclass(frozen=True)
class LcdResult:
    t_star: Optional[float]
    censored: bool
    dist: float
    lower_bound: float

    def to_text(self) -> str:
        t = "censored" if self.censored else repr(self.t_star)
        return f"t_star={t}\ncensored={str(self.censored).lower()}\ndist={self.dist!r}\nlower_bound={self.lower_bound!r}\n"


def lattice_distance(x: np.ndarray, ts) -> np.ndarray:
    """``dist(t x, Z^n)`` for each ``t``."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    G = np.multiply.outer(ts, x)
    G -= np.rint(G)
    return np.sqrt(np.einsum("ij,ij->i", G, G))


def _margin(x, ts, r, h):
    """``F(t) = dist(t x, Z^n) - min(r t, h)``; solutions are where F < 0."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    return lattice_distance(x, ts) - np.minimum(r * ts, h)


def lcd(x, params: LcdParams) -> LcdResult:
    """Certified scan for ``inf{t > 0 : dist(t x, Z^n) < min(r t, h)}``.

    ``F`` is (1+r)-Lipschitz, so an interval ``[a, b]`` with
    ``F(a) + F(b) >= (1+r)(b-a)`` holds no solution.  Where ``F`` is large
    the scan jumps ahead by ``F(a)/(1+r)``; elsewhere it walks a coarse grid
    in vectorized windows.  Intervals failing the test are bisected
    leftmost-first down to ``tol``.  No
    solution exists below ``1 / (2 max|x_i|)``, where ``t x`` rounds to 0.
    """
    x = _unit(x)
    r, h, tol = params.r, params.h, params.tol
    lip = 1.0 + r
    t0 = 0.5 / float(np.max(np.abs(x)))
    if t0 >= params.t_max:
        return LcdResult(None, True, math.nan, t0)

    F = lambda t: float(_margin(x, t, r, h)[0])  # noqa: E731
    step = params.coarse_step
    unresolved: Optional[float] = None
    evals = 0
    a, Fa = t0, F(t0)
    window = 256
    while a < params.t_max:
        if Fa > 8.0 * lip * step:
            # F(t) >= F(a) - lip (t - a): nothing below a + F(a)/lip
            ts = np.array([min(a + Fa / lip, params.t_max)])
        else:
            ts = a + step * np.arange(1, window + 1)
            ts = ts[ts < params.t_max]
            if ts.size < window:
                ts = np.append(ts, params.t_max)
        Fs = _margin(x, ts, r, h)
        evals += ts.size
        lefts = np.concatenate([[a], ts[:-1]])
        Flefts = np.concatenate([[Fa], Fs[:-1]])
        bad = np.flatnonzero(Flefts + Fs - lip * (ts - lefts) < 0)
        for b_i in bad:
            hit, ev, unres = _resolve(F, lefts[b_i], Flefts[b_i], ts[b_i], Fs[b_i], lip, tol,
                                      params.max_evals - evals)
            evals += ev
            if unres is not None and unresolved is None:
                unresolved = unres
            if hit is not None:
                t_star, t_left = hit
                lower = t_left if unresolved is None else min(unresolved, t_left)
                d = float(lattice_distance(x, t_star)[0])
                if not (lower <= t_star and d < min(r * t_star, h)):
                    raise InvariantViolation("lcd result violates its own contract")
                return LcdResult(float(t_star), False, d, float(lower))
            if evals >= params.max_evals:
                stop = lefts[b_i]
                lower = stop if unresolved is None else min(unresolved, stop)
                return LcdResult(None, True, math.nan, float(lower))
        if evals >= params.max_evals:
            lower = ts[-1] if unresolved is None else min(unresolved, ts[-1])
            return LcdResult(None, True, math.nan, float(lower))
        a, Fa = float(ts[-1]), float(Fs[-1])
    lower = params.t_max if unresolved is None else unresolved
    return LcdResult(None, True, math.nan, float(lower))


def _resolve(F, a, Fa, b, Fb, lip, tol, budget):
    """Leftmost-first branch and bound on ``[a, b]``.

    Returns (hit, evaluations, first unresolved left end).  ``hit`` is
    ``(t, left)`` with ``F(t) < 0``, ``t - left <= tol`` and no solution
    certified-free region skipped before ``left`` except unresolved slivers.
    """
    stack = [(a, Fa, b, Fb)]
    evals = 0
    unresolved = None
    while stack:
        a, Fa, b, Fb = stack.pop()
        if Fa + Fb - lip * (b - a) >= 0:
            continue
        if b - a <= tol:
            if Fb < 0:
                return (b, a), evals, unresolved
            if unresolved is None:
                unresolved = a
            continue
        if evals >= budget:
            if unresolved is None:
                unresolved = a
            return None, evals, unresolved
        m = 0.5 * (a + b)
        Fm = F(m)
        evals += 1
        stack.append((m, Fm, b, Fb))
        stack.append((a, Fa, m, Fm))
    return None, evals, unresolved


def lcd_fine_scan(x, r: float, h: float, t_max: float, step: float) -> Optional[float]:
    """First grid point ``t`` with ``F(t) < 0`` on a uniform grid (oracle only)."""
    x = np.asarray(x, dtype=float)
    n_steps = int(math.ceil(t_max / step))
    chunk = max(256, int(2_000_000 // max(1, x.size)))
    for j in range(1, n_steps + 1, chunk):
        ts = np.arange(j, min(n_steps, j + chunk - 1) + 1) * step
        Fs = _margin(x, ts, r, h)
        neg = np.flatnonzero(Fs < 0)
        if neg.size:
            return float(ts[neg[0]])
    return None


def level_set_membership(x, k: float, params: LcdParams) -> bool:
    """Whether ``k <= LCD(x) < 2k``, decided from the certified bracket."""
    res = lcd(x, params)
    lo = res.lower_bound
    hi = math.inf if res.censored else res.t_star
    if lo >= k and hi < 2 * k:
        return True
    if hi < k or lo >= 2 * k:
        return False
    raise IndeterminateError(
        f"LCD bracket [{lo:.6g}, {hi:.6g}] straddles the level boundary of [{k}, {2 * k})"
    )


# -- integer-point nets ----------------------------------------------------------------


@lru_cache(maxsize=None)
def lattice_count(n: int, r2: int) -> int:
    """Number of ``p`` in ``Z^n`` with ``||p||^2 <= r2`` (origin included)."""
    if r2 < 0:
        return 0
    if n == 0:
        return 1
    m = math.isqrt(r2)
    return sum(lattice_count(n - 1, r2 - a * a) for a in range(-m, m + 1))


@dataclass(frozen=True, eq=False)
class IntegerNet:
    points: np.ndarray
    lattice_points: int
    radius: float

    @property
    def measured_constant(self) -> float:
        """Smallest ``C`` with ``lattice_points <= (1 + C k / sqrt n)^n``."""
        n = self.points.shape[1]
        k = self.radius / 3.0
        return (self.lattice_points ** (1.0 / n) - 1.0) * math.sqrt(n) / k


def _lattice_points(n: int, r2: int):
    if n == 0:
        yield ()
        return
    m = math.isqrt(r2)
    for a in range(-m, m + 1):
        for rest in _lattice_points(n - 1, r2 - a * a):
            yield (a,) + rest


def integer_point_net(n: int, k: float, h: Optional[float] = None, cap: int = 10**6) -> IntegerNet:
    """Directions ``p / ||p||`` of nonzero lattice points with ``||p|| <= 3k``.

    ``h`` only sets the advertised net radius ``4h/k`` and is not needed to
    build the set.  Points sharing a direction are merged through their
    primitive vector.
    """
    if n < 1 or not k > 0:
        raise ParameterError("need n >= 1 and k > 0")
    R = 3.0 * k
    r2 = int(math.floor(R * R + 1e-9))
    total = lattice_count(n, r2) - 1
    if total > cap:
        raise BudgetError(f"{total} lattice points exceed the enumeration cap {cap}")
    dirs = set()
    for p in _lattice_points(n, r2):
        g = 0
        for v in p:
            g = math.gcd(g, v)
        if g:
            dirs.add(tuple(v // g for v in p))
    P = np.array(sorted(dirs), dtype=float)
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    return IntegerNet(P, total, R)
