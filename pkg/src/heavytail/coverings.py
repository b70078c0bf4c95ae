"""Grid operators, sparse cube covers and lazy parallelepiped location.

The covering collection itself is never built: a point is mapped to the
identifier of the parallelepiped containing it, and nets are refined by
memoizing one anchor per identifier.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import (
    CoverageError,
    DomainError,
    InvariantViolation,
    ParameterError,
    ShapeError,
)
from .norms import inf2_upper

LN2 = math.log(2.0)
MAX_CODE = 512
CODES = (0,) + tuple(1 << k for k in range(10))
_SLACK = 1e-12


def _is_code(e: int) -> bool:
    return e == 0 or (0 < e <= MAX_CODE and e & (e - 1) == 0)


@dataclass(frozen=True)
class GridOperator:
    """Diagonal operator with entries ``2**-e_i``, each code 0 or a power of 2 up to 512.

    ``underflow`` marks coordinates whose exact value fell below ``2**-512``
    and were capped.
    """

    codes: tuple
    underflow: tuple = ()

    def __post_init__(self):
        codes = tuple(int(e) for e in self.codes)
        bad = [e for e in codes if not _is_code(e)]
        if bad:
            raise ParameterError(f"invalid grid exponent codes {bad[:5]}")
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "underflow", tuple(int(i) for i in self.underflow))

    @classmethod
    def identity(cls, n: int) -> "GridOperator":
        return cls((0,) * n)

    @property
    def n(self) -> int:
        return len(self.codes)

    @property
    def exponent_sum(self) -> int:
        return sum(self.codes)

    @property
    def logdet(self) -> float:
        return -LN2 * self.exponent_sum

    @property
    def log_diagonal(self) -> np.ndarray:
        return -LN2 * np.asarray(self.codes, dtype=float)

    @property
    def diagonal(self) -> np.ndarray:
        return np.ldexp(1.0, -np.asarray(self.codes, dtype=int))

    def apply_columns(self, A) -> np.ndarray:
        """``A @ diag(self)``."""
        A = np.asarray(A, dtype=float)
        if A.shape[-1] != self.n:
            raise ShapeError(f"matrix with {A.shape[-1]} columns vs grid operator of size {self.n}")
        return A * self.diagonal

    def to_text(self) -> str:
        return " ".join(str(e) for e in self.codes)

    @classmethod
    def from_text(cls, text: str) -> "GridOperator":
        try:
            return cls(tuple(int(tok) for tok in text.split()))
        except ValueError as exc:
            raise ParameterError(f"cannot parse grid operator codes: {exc}") from exc


def exponent_budget(n: int, delta: float) -> int:
    """Largest ``W`` with ``W ln 2 <= delta n`` (tolerant to rounding)."""
    return int(math.floor(delta * n / LN2 * (1.0 + _SLACK)))


def count_bound_log(n: int, delta: float) -> float:
    """``log`` of ``(2e/delta)**(4 delta n)``."""
    return 4.0 * delta * n * math.log(2.0 * math.e / delta)


def count_grid_operators(n: int, delta: float) -> int:
    """Number of grid operators of size ``n`` with ``det >= exp(-delta n)``.

    Counts code vectors with ``sum(e_i) <= W``.  Splitting by the number
    ``m`` of non-unit coordinates gives ``sum_m C(n, m) g_m``, where ``g_m``
    counts ordered ``m``-tuples of codes ``2**k`` with exponent sum at most
    ``W``; ``h_m[s]`` (sum exactly ``s``) obeys ``h_m = h_{m-1} * P`` with
    ``P(x) = sum_k x**(2**k)``.  Python integers keep everything exact.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not 0 < delta <= 1:
        raise ParameterError("delta must lie in (0, 1]")
    W = exponent_budget(n, delta)
    steps = [c for c in CODES[1:] if c <= W]
    h = np.zeros(W + 1, dtype=object)
    h[:] = 0
    h[0] = 1
    total = 1
    for m in range(1, min(n, W) + 1):
        nxt = np.zeros(W + 1, dtype=object)
        nxt[:] = 0
        for c in steps:
            nxt[c:] += h[: W + 1 - c]
        h = nxt
        total += math.comb(n, m) * int(h.sum())
    if math.log(total) > count_bound_log(n, delta) + 1e-9:
        raise InvariantViolation(
            f"count {total} exceeds (2e/delta)^(4 delta n) for n={n}, delta={delta}"
        )
    return total


def enumerate_grid_operators(n: int, delta: float) -> Iterable[tuple]:
    """All admissible code vectors, by brute force (small ``n`` only)."""
    import itertools

    W = exponent_budget(n, delta)
    codes = [c for c in CODES if c <= W]
    for combo in itertools.product(codes, repeat=n):
        if sum(combo) <= W:
            yield combo


def theorem_id_bound_log(n: int, delta: float) -> float:
    """``13 n delta ln(2e/delta)``: log of the bound on the collection size."""
    return 13.0 * n * delta * math.log(2.0 * math.e / delta)


# -- cubes and parallelepipeds -----------------------------------------------------


def _check_ball(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 1:
        raise ShapeError("empty vector")
    if not np.all(np.isfinite(x)):
        raise DomainError("vector has non-finite entries")
    norm = float(np.linalg.norm(x))
    if norm > 1.0 + 1e-10:
        raise DomainError(f"vector norm {norm:.12g} exceeds 1")
    return x


def _snap(u: np.ndarray) -> np.ndarray:
    """Nearest integer with ties to the lower index: cell ``(j - 1/2, j + 1/2]``."""
    return np.ceil(u - 0.5).astype(np.int64)


def clamp_K(K: float, n: int) -> float:
    return float(min(max(K, 2.0), 2.0 * math.sqrt(n)))


def cube_index(x, K: float) -> np.ndarray:
    """Integer index of the cube center; the center is ``index * K / sqrt(n)``."""
    x = _check_ball(x)
    n = x.size
    K = clamp_K(K, n)
    step = K / math.sqrt(n)
    heavy = np.abs(x) >= 0.5 * step
    idx = np.where(heavy, _snap(x / step), 0)
    return idx.astype(np.int64)


def locate_cube(x, K: float) -> np.ndarray:
    """Center ``c`` of a sparse cube with ``||x - c||_inf <= K / (2 sqrt n)``."""
    x = _check_ball(x)
    n = x.size
    step = clamp_K(K, n) / math.sqrt(n)
    c = cube_index(x, K) * step
    return c


@dataclass(frozen=True)
class ParallelepipedId:
    codes: tuple
    cube: tuple
    inner: tuple
    delta: float

    def to_text(self) -> str:
        return "(" + ";".join([
            " ".join(map(str, self.codes)),
            " ".join(map(str, self.cube)),
            " ".join(map(str, self.inner)),
            repr(float(self.delta)),
        ]) + ")"


def check_theorem_range(n: int, delta: float) -> None:
    if not 0 < delta <= 0.25:
        raise ParameterError(f"delta must lie in (0, 1/4], got {delta}")
    if n < 1.0 / (4.0 * delta):
        raise ParameterError(f"n={n} is below 1/(4 delta)={1 / (4 * delta):.4g}")


def parallelepiped_geometry(x, D: GridOperator, delta: float):
    """Return (id, center, half_widths) for the parallelepiped containing ``x``."""
    x = _check_ball(x)
    n = x.size
    if D.n != n:
        raise ShapeError(f"vector of length {n} vs grid operator of size {D.n}")
    check_theorem_range(n, delta)
    K = 1.0 / math.sqrt(delta)
    outer_step = K / math.sqrt(n)
    cube = cube_index(x, K)
    c = cube * outer_step
    widths = D.diagonal / math.sqrt(n * delta)
    u = (x - c) / widths
    # kept as floats: deep codes give indices far beyond int64
    inner = np.ceil(u - 0.5)
    if np.any(np.abs(u - inner) > 1.0):
        raise InvariantViolation("located parallelepiped does not contain the point")
    center = c + inner * widths
    pid = ParallelepipedId(
        D.codes, tuple(int(v) for v in cube), tuple(int(v) for v in inner), float(delta)
    )
    return pid, center, widths


def locate_parallelepiped(x, D: GridOperator, delta: float) -> ParallelepipedId:
    """Identifier of the translate of ``D (n delta)^{-1/2} B_inf`` holding ``x``."""
    return parallelepiped_geometry(x, D, delta)[0]


def covering_radius_certificate(A, D: GridOperator, delta: float) -> float:
    """Upper bound on the radius of ``A(P)`` for every parallelepiped ``P`` from ``D``."""
    A = np.asarray(A, dtype=float)
    n = D.n
    if not np.any(A):
        return 0.0
    return inf2_upper(D.apply_columns(A)) / math.sqrt(n * delta)


class RefinedNet:
    """Lazily refined net: each (base point, parallelepiped id) gets one anchor.

    The first point seen in a cell becomes its anchor.  Inserts are guarded
    by a lock so concurrent queries agree on anchors.
    """

    def __init__(self, base_net, eps: float, delta: float, D: GridOperator):
        base = np.atleast_2d(np.asarray(base_net, dtype=float))
        if base.shape[1] != D.n:
            raise ShapeError("base net dimension does not match the grid operator")
        if not eps > 0:
            raise ParameterError("eps must be > 0")
        check_theorem_range(D.n, delta)
        self.base = base
        self.eps = float(eps)
        self.delta = float(delta)
        self.D = D
        self._anchors: dict = {}
        self._lock = threading.Lock()

    def key(self, x) -> tuple:
        x = np.asarray(x, dtype=float).ravel()
        dists = np.linalg.norm(self.base - x, axis=1)
        j = int(np.argmin(dists))
        if dists[j] > self.eps * (1.0 + 1e-12):
            raise CoverageError(
                f"no base point within eps={self.eps} of x={np.array2string(x, precision=4)}"
                f" (nearest at {dists[j]:.4g})"
            )
        u = (x - self.base[j]) / self.eps
        nu = float(np.linalg.norm(u))
        if nu > 1.0:
            u = u / nu
        return j, locate_parallelepiped(u, self.D, self.delta)

    def anchor(self, x) -> np.ndarray:
        k = self.key(x)
        with self._lock:
            a = self._anchors.get(k)
            if a is None:
                a = np.array(x, dtype=float).ravel()
                a.setflags(write=False)
                self._anchors[k] = a
        return a

    def __len__(self) -> int:
        return len(self._anchors)

    def distinct_ids(self) -> int:
        return len({pid for _, pid in self._anchors})


def refine_net(points, base_net, eps: float, delta: float, D: GridOperator,
               net: Optional[RefinedNet] = None):
    """Anchor for each point of ``points``; returns (anchors array, net)."""
    net = net if net is not None else RefinedNet(base_net, eps, delta, D)
    anchors = np.array([net.anchor(x) for x in np.atleast_2d(points)])
    return anchors, net
