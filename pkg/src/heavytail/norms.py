"""Operator norms and spectral quantities.

The infinity-to-two norm of ``B`` is the maximum of ``||B v||`` over sign
vectors ``v``; it is computed exactly by enumeration for narrow matrices,
bounded from below by sign ascent, and from above by two cheap comparisons.
"""
from __future__ import annotations

import math
import warnings

import numpy as np

from .distributions import SeedLike, as_generator
from .errors import CapError, DomainError, IllConditionedWarning, NumericalError, ShapeError

EXACT_CAP = 24
# columns per enumeration block; 2**12 images of length `rows` stay small
_BLOCK = 12
_CHUNK = 512


def as_matrix(B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[None, :]
    if B.ndim != 2 or B.shape[0] < 1 or B.shape[1] < 1:
        raise ShapeError(f"expected a non-empty 2-d matrix, got shape {B.shape}")
    if not np.all(np.isfinite(B)):
        raise DomainError("matrix has non-finite entries")
    return B


def _gray_images(C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Images ``C s`` for all sign vectors ``s`` of the columns of ``C``.

    Walks the reflected Gray code so each step flips one sign and costs one
    column update.  Returns (images of shape rows x 2^a, signs a x 2^a).
    """
    rows, a = C.shape
    total = 1 << a
    images = np.empty((rows, total))
    signs = np.empty((a, total), dtype=np.int8)
    s = np.ones(a, dtype=np.int8)
    img = C.sum(axis=1)
    images[:, 0] = img
    signs[:, 0] = s
    for t in range(1, total):
        j = (t & -t).bit_length() - 1
        s[j] = -s[j]
        img = img + (2.0 * s[j]) * C[:, j]
        images[:, t] = img
        signs[:, t] = s
    return images, signs


def inf2_exact(B, cap: int = EXACT_CAP) -> tuple[float, np.ndarray]:
    """Exact ``||B||_{inf->2}`` and a maximizing sign vector.

    The last sign is fixed to +1 (``v`` and ``-v`` give the same norm).  The
    remaining columns are split into two Gray-code enumerated blocks whose
    images are combined through one matrix product per chunk:
    ``||h + l||^2 = ||h||^2 + 2 <h, l> + ||l||^2``.
    """
    B = as_matrix(B)
    rows, n = B.shape
    if n > cap:
        raise CapError(f"{n} columns exceed the exact enumeration cap {cap}")
    if n == 1:
        return float(np.linalg.norm(B[:, 0])), np.ones(1)

    free = n - 1
    a = min(_BLOCK, (free + 1) // 2)
    lo_img, lo_sig = _gray_images(B[:, :a])
    if free > a:
        hi_img, hi_sig = _gray_images(B[:, a:free])
    else:
        hi_img, hi_sig = np.zeros((rows, 1)), np.zeros((0, 1), dtype=np.int8)
    hi_img = hi_img + B[:, -1:]

    lo_sq = np.einsum("ij,ij->j", lo_img, lo_img)
    hi_sq = np.einsum("ij,ij->j", hi_img, hi_img)
    best, best_pair = -1.0, (0, 0)
    for start in range(0, hi_img.shape[1], _CHUNK):
        stop = start + _CHUNK
        vals = hi_sq[start:stop, None] + 2.0 * (hi_img[:, start:stop].T @ lo_img) + lo_sq[None, :]
        flat = int(np.argmax(vals))
        i, j = divmod(flat, vals.shape[1])
        if vals[i, j] > best:
            best, best_pair = float(vals[i, j]), (start + i, j)
    hi_idx, lo_idx = best_pair
    witness = np.concatenate(
        [lo_sig[:, lo_idx], hi_sig[:, hi_idx], [1]]
    ).astype(float)
    return float(np.linalg.norm(B @ witness)), witness


def inf2_lower(B, restarts: int = 1, seed: SeedLike = None,
               start: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Certified lower bound on ``||B||_{inf->2}`` by single-sign ascent.

    From each start, coordinate ``j`` is set to the sign of
    ``sum_{i != j} (B^T B)_{ji} v_i`` until a full sweep changes nothing;
    a zero keeps the current sign, so every flip strictly increases
    ``||B v||`` and the ascent terminates.
    """
    B = as_matrix(B)
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    n = B.shape[1]
    rng = as_generator(seed)
    V = rng.choice(np.array([-1.0, 1.0]), size=(n, restarts))
    if start is not None:
        V[:, 0] = np.where(np.asarray(start, dtype=float) < 0, -1.0, 1.0)
    G = B.T @ B
    diag = np.diag(G)
    changed = True
    while changed:
        changed = False
        for j in range(n):
            s = G[j] @ V - diag[j] * V[j]
            new = np.where(s > 0, 1.0, np.where(s < 0, -1.0, V[j]))
            if np.any(new != V[j]):
                V[j] = new
                changed = True
    norms = np.linalg.norm(B @ V, axis=0)
    r = int(np.argmax(norms))
    return float(norms[r]), V[:, r].copy()


def inf2_upper(B) -> float:
    """``min(sqrt(cols) ||B||_2, sqrt(sum_i (sum_j |b_ij|)^2))``."""
    B = as_matrix(B)
    via_spectral = math.sqrt(B.shape[1]) * spectral_norm(B)
    via_rows = float(np.linalg.norm(np.abs(B).sum(axis=1)))
    return min(via_spectral, via_rows)


def svd(B, full_matrices: bool = False):
    """SVD with the reconstruction contract ``||B - U S V^T||_F <= 1e-8 ||B||_F``."""
    B = as_matrix(B)
    try:
        U, s, Vh = np.linalg.svd(B, full_matrices=full_matrices)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD did not converge for {B.shape} matrix "
            f"(||B||_F={np.linalg.norm(B):.3e}, max|b|={np.abs(B).max():.3e})"
        ) from exc
    k = s.size
    resid = np.linalg.norm(B - (U[:, :k] * s) @ Vh[:k])
    scale = np.linalg.norm(B)
    if resid > 1e-8 * scale:
        cond = s[0] / s[-1] if s[-1] > 0 else math.inf
        raise NumericalError(
            f"SVD reconstruction error {resid:.3e} exceeds 1e-8 * {scale:.3e} (cond={cond:.3e})"
        )
    return U, s, Vh


def spectral_norm(B) -> float:
    return float(svd(B)[1][0])


def smin(B) -> float:
    """``inf_{||y||=1} ||B y||``: the smallest singular value, 0 for wide B."""
    return smin_with_vector(B)[0]


def smin_with_vector(B) -> tuple[float, np.ndarray]:
    """Smallest singular value and a unit ``y`` attaining it."""
    B = as_matrix(B)
    rows, cols = B.shape
    _, s, Vh = svd(B, full_matrices=rows < cols)
    if rows < cols:
        return 0.0, Vh[-1].copy()
    return float(s[-1]), Vh[-1].copy()


def distance_to_span(x, columns) -> float:
    """Euclidean distance from ``x`` to the column space of ``columns``."""
    x = np.asarray(x, dtype=float).ravel()
    C = np.asarray(columns, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if C.shape[0] != x.size:
        raise ShapeError(f"vector of length {x.size} vs columns of length {C.shape[0]}")
    if C.shape[1] == 0:
        return float(np.linalg.norm(x))
    coef, *_ = np.linalg.lstsq(C, x, rcond=None)
    return float(np.linalg.norm(x - C @ coef))


def unit_normal(Ap, seed: SeedLike = None) -> np.ndarray:
    """A unit vector in the null space of ``Ap`` (shape (n-1) x n or any k x n).

    When the null space has dimension > 1 a uniformly random unit vector of
    it is drawn from ``seed``.  An ill-determined null space triggers an
    :class:`IllConditionedWarning`; the vector is still returned.
    """
    Ap = as_matrix(Ap)
    k, n = Ap.shape
    _, s, Vh = svd(Ap, full_matrices=True)
    smax = s[0] if s.size else 0.0
    tol = max(k, n) * np.finfo(float).eps * smax
    rank = int(np.sum(s > tol))
    basis = Vh[rank:]
    if basis.shape[0] == 0:
        raise DomainError("matrix has a trivial null space")
    if rank > 0 and s[rank - 1] <= 1e-12 * smax:
        warnings.warn(
            f"null space ill-determined: singular value {s[rank - 1]:.3e} vs max {smax:.3e}",
            IllConditionedWarning,
            stacklevel=2,
        )
    if basis.shape[0] == 1:
        x = basis[0].copy()
    else:
        g = as_generator(seed).standard_normal(basis.shape[0])
        x = g @ basis
    x /= np.linalg.norm(x)
    if np.linalg.norm(Ap @ x) > 1e-8 * max(smax, 1e-300) and smax > 0:
        raise NumericalError("null vector fails the orthogonality contract")
    return x


def permute_rows_independently(B, seed: SeedLike = None) -> np.ndarray:
    """Each row permuted by its own uniform random permutation."""
    B = as_matrix(B)
    return as_generator(seed).permuted(B, axis=1)
