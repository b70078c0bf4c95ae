"""Diagonal contractions that pull the rows of a matrix into a fixed ball.

For a non-negative vector ``y`` and dyadic levels ``tau_k`` of its law, the
exceedance set ``E_k = {i : y_i >= tau_k}`` is shrunk whenever it is much
larger than its expected size ``2^-k n``.  All diagonals are kept as
logarithms.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .coverings import LN2, MAX_CODE, GridOperator
from .distributions import EntryDistribution, LevelSequence, SeedLike, as_generator, levels
from .errors import DomainError, InvariantViolation, ParameterError, ResolutionError, ShapeError
from .norms import inf2_upper

# deepest usable level: 2^-1022 is the smallest normal double
MAX_LEVEL = 1022
_TOL = 1e-12


@dataclass(frozen=True)
class RegularizerParams:
    """Budget constant ``L >= 2e``, ``delta`` in (0, 1], moment ``p``.

    ``K`` overrides the default level cap ``ceil(log2(L n / delta)) + 2``.
    ``overflow`` chooses what happens to coordinates above the top level:
    ``"adaptive"`` raises ``K`` until they are covered, ``"clamp"`` keeps
    ``K`` and flags them.  ``coupling="independent"`` replaces the exceedance
    indicators by independent Bernoulli(2^-k) fields.
    """

    L: float = 2.0 * math.e
    delta: float = 0.1
    p_moment: float = 2.0
    alpha: float = 0.5
    K: Optional[int] = None
    overflow: str = "adaptive"
    coupling: str = "nested"

    def __post_init__(self):
        if not self.L >= 2.0 * math.e * (1.0 - 1e-15):
            raise ParameterError(f"L must be >= 2e, got {self.L}")
        if not 0 < self.delta <= 1:
            raise ParameterError(f"delta must lie in (0, 1], got {self.delta}")
        if not 0 < self.alpha < 1:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.p_moment < 1:
            raise ParameterError("p_moment must be >= 1")
        if self.K is not None and not 1 <= self.K <= MAX_LEVEL:
            raise ParameterError(f"K must lie in [1, {MAX_LEVEL}]")
        if self.overflow not in ("adaptive", "clamp"):
            raise ParameterError(f"unknown overflow policy {self.overflow!r}")
        if self.coupling not in ("nested", "independent"):
            raise ParameterError(f"unknown coupling {self.coupling!r}")

    def level_cap(self, n: int) -> int:
        if self.K is not None:
            return self.K
        return min(MAX_LEVEL, math.ceil(math.log2(self.L * n / self.delta)) + 2)


@dataclass(frozen=True)
class Factor:
    """One shrink step: coordinates ``indices`` of ``row`` at ``level`` scaled by ``exp(log_factor)``."""

    row: int
    level: int
    indices: tuple
    log_factor: float


@dataclass(frozen=True, eq=False)
class DiagonalContraction:
    log_diagonal: np.ndarray
    factors: tuple = ()
    bound: float = math.inf
    flagged: tuple = ()
    K: int = 0
    nu: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.log_diagonal)

    @property
    def diagonal(self) -> np.ndarray:
        return np.exp(self.log_diagonal)

    @property
    def logdet(self) -> float:
        return math.fsum(self.log_diagonal)

    def factor_logdet(self) -> float:
        return math.fsum(len(f.indices) * f.log_factor for f in self.factors)

    def reconstruct(self) -> np.ndarray:
        """Log-diagonal rebuilt from the factor list."""
        out = np.zeros(self.n)
        for f in self.factors:
            out[list(f.indices)] += f.log_factor
        return out


def _as_levels(lv) -> np.ndarray:
    tau = np.asarray(lv.values if isinstance(lv, LevelSequence) else lv, dtype=float)
    if tau.ndim != 1 or tau.size < 2:
        raise ShapeError("need at least two levels")
    if np.any(np.diff(tau) < 0) or tau[0] < 0:
        raise ParameterError("levels must be non-negative and nondecreasing")
    return tau


def level_bound(tau: np.ndarray, n: int, L: float, delta: float) -> float:
    """``(L n / delta) sum_{k<M} tau_{k+1} 2^-k`` for levels ``tau_0..tau_M``."""
    k = np.arange(tau.size - 1)
    return L * n / delta * math.fsum(np.ldexp(tau[1:], -k))


def _heart_block(Y: np.ndarray, tau: np.ndarray, L: float, delta: float,
                 coupling: str = "nested", rng: Optional[np.random.Generator] = None):
    """Heart contraction applied to every row of ``Y`` independently.

    Returns (log-diagonals per row, factor list, exceedance counts per level).
    Level 0 always selects every coordinate; it can never trigger since
    ``nu_0 <= n < L n / delta``.
    """
    rows, n = Y.shape
    M = tau.size - 1
    logd = np.zeros((rows, n))
    nu_all = np.zeros((rows, M), dtype=np.int64)
    factors = []
    for k in range(M):
        if coupling == "nested":
            mask = np.ones_like(Y, dtype=bool) if k == 0 else Y >= tau[k]
        else:
            mask = rng.random((rows, n)) < math.ldexp(1.0, -k)
        nu = mask.sum(axis=1)
        nu_all[:, k] = nu
        if coupling == "nested" and not nu.any():
            break
        # trigger when nu_k >= L 2^-k n / delta; shrink by that ratio
        target = L * math.ldexp(1.0, -k) * n / delta
        trig = np.flatnonzero(nu >= target)
        for r in trig:
            lf = math.log(target / nu[r])
            idx = np.flatnonzero(mask[r])
            logd[r, idx] += lf
            factors.append(Factor(int(r), k, tuple(int(i) for i in idx), lf))
    return logd, factors, nu_all


def heart_contraction(y, lv, params: RegularizerParams,
                      rng: SeedLike = None) -> DiagonalContraction:
    """Contraction of a single non-negative vector.

    With the nested coupling ``<D y> <= bound`` holds for every input and is
    asserted.  Coordinates above the top level are flagged and the top level
    is raised to ``max(y)`` inside the bound so it stays valid.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ShapeError("y must be a vector")
    if not np.all(np.isfinite(y)):
        raise DomainError("y has non-finite coordinates")
    if np.any(y < 0):
        raise DomainError("y has negative coordinates")
    tau = _as_levels(lv)
    n = y.size
    flagged = tuple(int(i) for i in np.flatnonzero(y > tau[-1]))
    if flagged:
        tau = tau.copy()
        tau[-1] = float(y.max())
    gen = as_generator(rng) if params.coupling == "independent" else None
    logd, factors, nu = _heart_block(y[None, :], tau, params.L, params.delta, params.coupling, gen)
    bound = level_bound(tau, n, params.L, params.delta)
    out = DiagonalContraction(logd[0], tuple(factors), bound, flagged, tau.size - 1, nu[0])
    if params.coupling == "nested":
        fit = float(np.dot(np.exp(logd[0]), y))
        if fit > bound * (1.0 + _TOL):
            raise InvariantViolation(f"l1 fit {fit:.6g} exceeds bound {bound:.6g}")
    return out


@functools.lru_cache(maxsize=256)
def _analytic_levels(dist: EntryDistribution, K: int) -> np.ndarray:
    tau = levels(dist, 2.0, K).values
    tau = tau[np.isfinite(tau)]
    tau.setflags(write=False)
    return tau


def square_levels(dist: EntryDistribution, K: int, seed: SeedLike = 0) -> np.ndarray:
    """Levels of ``x^2``; cached for closed-form families."""
    if dist.is_analytic:
        return _analytic_levels(dist, K)
    return levels(dist, 2.0, K, seed=seed).values


def covering_levels(dist: EntryDistribution, K: int, ymax: float, overflow: str) -> np.ndarray:
    """Levels with at least ``K`` steps, extended (adaptive policy) until
    the top level reaches ``ymax`` or the resolution limit."""
    tau = square_levels(dist, K)
    if overflow == "clamp" or tau[-1] >= ymax:
        return tau
    q = dist.abs_sf(math.sqrt(ymax))
    while tau[-1] < ymax and K < MAX_LEVEL:
        need = MAX_LEVEL if q <= 0 else math.ceil(-math.log2(q)) + 1
        K = min(MAX_LEVEL, max(need, K + 1))
        try:
            tau = square_levels(dist, K)
        except ResolutionError:
            break
        if tau.size < K + 1:
            break
    return tau


def row_regularizer(A, delta: float, dist: EntryDistribution,
                    params: Optional[RegularizerParams] = None,
                    lv: Optional[Sequence[float]] = None,
                    rng: SeedLike = None) -> DiagonalContraction:
    """``D = prod_i T_i^{1/2}`` where ``T_i`` is the heart contraction of row ``i`` squared.

    ``bound`` on the result is the realized row-norm bound: every row of
    ``A D`` has Euclidean norm at most ``bound`` (asserted).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"row_regularizer needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    params = params if params is not None else RegularizerParams(delta=delta)
    if params.delta != delta:
        params = RegularizerParams(params.L, delta, 2.0, params.alpha, params.K,
                                   params.overflow, params.coupling)
    n = A.shape[0]
    Y = A * A
    ymax = float(Y.max())
    if lv is not None:
        tau = _as_levels(lv)
    else:
        tau = covering_levels(dist, params.level_cap(n), ymax, params.overflow)
    flagged = tuple(int(j) for j in np.flatnonzero((Y > tau[-1]).any(axis=0)))
    if flagged:
        tau = np.array(tau, dtype=float)
        tau[-1] = ymax
    gen = as_generator(rng) if params.coupling == "independent" else None
    logT, factors, nu = _heart_block(Y, tau, params.L, delta, params.coupling, gen)
    log_diagonal = 0.5 * logT.sum(axis=0)
    half = tuple(Factor(f.row, f.level, f.indices, 0.5 * f.log_factor) for f in factors)
    row_bound = math.sqrt(level_bound(tau, n, params.L, delta))
    out = DiagonalContraction(log_diagonal, half, row_bound, flagged, tau.size - 1, nu)
    if params.coupling == "nested":
        worst = float(np.sqrt((Y * np.exp(2.0 * log_diagonal)).sum(axis=1)).max())
        if worst > row_bound * (1.0 + _TOL):
            raise InvariantViolation(f"row norm {worst:.6g} exceeds bound {row_bound:.6g}")
    return out


def discretize_log(log_t) -> tuple[np.ndarray, np.ndarray]:
    """Grid codes for log-diagonals; returns (codes, underflow mask).

    The code is the smallest ``e`` in {0, 1, 2, 4, ...} with
    ``2^-e <= sqrt(2) t``, so that ``t^2 <= 2^-e <= sqrt(2) t``.
    """
    log_t = np.asarray(log_t, dtype=float)
    if np.any(log_t > _TOL):
        raise DomainError("diagonal values must lie in (0, 1]")
    x = -log_t / LN2 - 0.5 - 1e-12
    codes = np.zeros(x.shape, dtype=np.int64)
    pos = x > 0
    # smallest power of two >= x
    codes[pos] = np.ldexp(1.0, np.maximum(0, np.ceil(np.log2(x[pos])).astype(int))).astype(np.int64)
    under = codes > MAX_CODE
    codes[under] = MAX_CODE
    return codes, under


def discretize(D: DiagonalContraction) -> GridOperator:
    """Snap each diagonal ``t`` to the grid with ``t^2 <= t~ <= sqrt(2) t``."""
    codes, under = discretize_log(D.log_diagonal)
    log_grid = -LN2 * codes
    ok = under | (log_grid <= D.log_diagonal + 0.5 * LN2 + 1e-9)
    ok &= log_grid >= 2.0 * D.log_diagonal - 1e-9
    if not ok.all():
        raise InvariantViolation("grid sandwich violated")
    return GridOperator(tuple(int(c) for c in codes), tuple(int(i) for i in np.flatnonzero(under)))


@dataclass(frozen=True)
class Certificate:
    n: int
    delta: float
    logdet: float
    logdet_threshold: float
    max_row_norm: float
    inf2_upper: float
    passed: bool

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.items())

    def items(self):
        return [
            ("n", self.n),
            ("delta", repr(self.delta)),
            ("logdet", repr(self.logdet)),
            ("logdet_threshold", repr(self.logdet_threshold)),
            ("max_row_norm", repr(self.max_row_norm)),
            ("inf2_upper", repr(self.inf2_upper)),
            ("pass", "true" if self.passed else "false"),
        ]


def regularize_to_grid(A, delta: float, dist: EntryDistribution,
                       params: Optional[RegularizerParams] = None,
                       rng: SeedLike = None) -> tuple[GridOperator, Certificate, DiagonalContraction]:
    """Row regularizer followed by discretization, with its certificate."""
    A = np.asarray(A, dtype=float)
    D = row_regularizer(A, delta, dist, params, rng=rng)
    G = discretize(D)
    AG = G.apply_columns(A)
    n = A.shape[0]
    cert = Certificate(
        n=n,
        delta=float(delta),
        logdet=G.logdet,
        logdet_threshold=-delta * n,
        max_row_norm=float(np.linalg.norm(AG, axis=1).max()),
        inf2_upper=inf2_upper(AG),
        passed=G.logdet >= -delta * n,
    )
    return G, cert, D
