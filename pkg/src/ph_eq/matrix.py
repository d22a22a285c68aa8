"""Matrix-theoretic primitives: irreducibility, Perron pairs, spectral
abscissa, Hurwitz and M-matrix tests, and the diagonal-dominance witness.

All functions take array-likes and never mutate their inputs.
"""

import enum
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, PreconditionError

ZERO_TOL = 1e-12
HURWITZ_TOL = 1e-9


def as_square(M, name="M"):
    """Return ``M`` as a finite float square matrix or raise ValueError."""
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def digraph_edges(M, zero_tol=ZERO_TOL):
    """Weighted edges ``(i, j, w)`` of the digraph of ``M``.

    Edge ``(i, j)`` is present iff ``M[j, i] != 0``, i.e. node ``i``
    influences node ``j``.
    """
    M = as_square(M)
    n = M.shape[0]
    return [(i, j, M[j, i]) for i in range(n) for j in range(n)
            if i != j and abs(M[j, i]) > zero_tol]


def is_irreducible(M, zero_tol=ZERO_TOL):
    """True iff the digraph of ``M`` is strongly connected."""
    M = as_square(M)
    if M.shape[0] == 1:
        return True
    adjacency = (np.abs(M) > zero_tol).astype(int)
    np.fill_diagonal(adjacency, 0)
    ncomp, _ = connected_components(adjacency, directed=True, connection="strong")
    return ncomp == 1


def is_metzler(M, tol=0.0):
    """True iff every off-diagonal entry is >= -tol."""
    M = as_square(M)
    off = M[~np.eye(M.shape[0], dtype=bool)]
    return bool(np.all(off >= -tol))


def eigenvalues(M):
    M = as_square(M)
    try:
        return np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"dense eigensolver failed: {exc}") from exc


def spectral_abscissa(M):
    """Largest real part among the eigenvalues of ``M``."""
    return float(np.max(eigenvalues(M).real))


def spectral_radius(M):
    return float(np.max(np.abs(eigenvalues(M))))


@dataclass(frozen=True)
class PerronPair:
    """Dominant eigenvalue ``value = s(M)`` and its positive eigenvector,
    normalized so that ``max(vector) == 1``."""

    value: float
    vector: np.ndarray
    residual: float
    iterations: int


def perron_pair(M, tol=1e-13, max_iter=200_000):
    """Perron pair of an irreducible Metzler matrix by shifted power iteration.

    ``M + cI`` is nonnegative with a strictly positive diagonal, hence
    primitive, so the power iteration converges to the Perron vector.
    Iteration stops once the Collatz-Wielandt bounds
    ``min_i (Pv)_i / v_i <= rho(P) <= max_i (Pv)_i / v_i`` agree to ``tol``
    (relative to the matrix scale).
    """
    M = as_square(M)
    if not is_metzler(M):
        raise PreconditionError("perron_pair requires a Metzler matrix")
    if not is_irreducible(M):
        raise PreconditionError("perron_pair requires an irreducible matrix")
    n = M.shape[0]
    scale = max(np.max(np.abs(M)), np.finfo(float).tiny)
    shift = np.max(np.abs(np.diag(M))) + 0.1 * scale
    P = M + shift * np.eye(n)

    v = np.ones(n)
    lo = hi = 0.0
    for it in range(1, max_iter + 1):
        w = P @ v
        ratios = w / v
        lo, hi = ratios.min(), ratios.max()
        v = w / w.max()
        if hi - lo <= tol * scale:
            break
    else:
        raise ConvergenceError("power iteration did not converge", residual=hi - lo)

    value = 0.5 * (lo + hi) - shift
    residual = float(np.max(np.abs(M @ v - value * v)))
    return PerronPair(value=float(value), vector=v, residual=residual, iterations=it)


@dataclass(frozen=True)
class HurwitzResult:
    """Outcome of a Hurwitz test.

    Truthiness is the strict verdict ``s(M) < -tol``; ``verdict`` is
    ``None`` when ``|s(M)| <= tol`` (too close to the imaginary axis to
    call).
    """

    abscissa: float
    tol: float = HURWITZ_TOL

    @property
    def margin(self):
        return -self.abscissa

    @property
    def indeterminate(self):
        return abs(self.abscissa) <= self.tol

    @property
    def verdict(self):
        if self.indeterminate:
            return None
        return self.abscissa < 0

    def __bool__(self):
        return self.abscissa < -self.tol


def is_hurwitz(M, tol=HURWITZ_TOL):
    return HurwitzResult(abscissa=spectral_abscissa(M), tol=tol)


class MMatrixClass(enum.Enum):
    NONSINGULAR_M = "NonsingularM"
    SINGULAR_M = "SingularM"
    NOT_M = "NotM"
    NOT_Z_MATRIX = "NotZMatrix"


def is_z_matrix(R):
    R = as_square(R)
    off = R[~np.eye(R.shape[0], dtype=bool)]
    return bool(np.all(off <= 0))


def classify_z_matrix(R, tol=HURWITZ_TOL):
    """Classify ``R`` as a (non)singular M-matrix via its eigenvalues.

    For Z-matrices, being an M-matrix is equivalent to every eigenvalue
    having nonnegative real part.
    """
    R = as_square(R, "R")
    if not is_z_matrix(R):
        return MMatrixClass.NOT_Z_MATRIX
    min_real = -spectral_abscissa(-R)
    if min_real > tol:
        return MMatrixClass.NONSINGULAR_M
    if min_real >= -tol:
        return MMatrixClass.SINGULAR_M
    return MMatrixClass.NOT_M


def leading_minors(A):
    A = as_square(A, "A")
    return np.array([np.linalg.det(A[:k, :k]) for k in range(1, A.shape[0] + 1)])


def check_leading_minors(A):
    """True iff every leading principal minor of ``A`` is positive."""
    return bool(np.all(leading_minors(A) > 0))


def diagonal_dominance_margins(A, d):
    """``d_i a_ii - sum_{j != i} d_j |a_ij|`` for every row ``i``."""
    A = as_square(A, "A")
    d = np.asarray(d, dtype=float)
    off = np.abs(A) * d[None, :]
    np.fill_diagonal(off, 0.0)
    return d * np.diag(A) - off.sum(axis=1)


def find_diagonal_scaling(A):
    """Positive ``d`` with ``A diag(d)`` strictly row diagonally dominant.

    Only Z-matrices with positive diagonal are accepted. For a nonsingular
    M-matrix ``A^{-1} >= 0``, so ``d = A^{-1} 1`` is positive and every
    dominance margin equals 1. Returns ``None`` when ``A`` is singular or
    the witness fails verification.
    """
    A = as_square(A, "A")
    if not (is_z_matrix(A) and np.all(np.diag(A) > 0)):
        raise PreconditionError("find_diagonal_scaling needs a Z-matrix with positive diagonal")
    if np.linalg.cond(A) > 1.0 / np.finfo(float).eps:
        return None
    try:
        d = np.linalg.solve(A, np.ones(A.shape[0]))
    except np.linalg.LinAlgError:
        return None
    if not np.all(d > 0):
        return None
    if not np.all(diagonal_dominance_margins(A, d) > 0):
        return None
    return d
