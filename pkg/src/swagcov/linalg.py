"""Dense symmetric / Kronecker linear algebra primitives.

Everything here is value-semantics: operations never mutate their inputs,
and the only cached state is the per-instance Cholesky factor of an
:class:`SpdMatrix`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cho_solve, solve_triangular


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix expected to be SPD fails its Cholesky factorization."""


@dataclass(frozen=True)
class MatrixShape:
    """Row/column dimensions of a matrix-variate observation."""

    p1: int
    p2: int

    def __post_init__(self):
        if self.p1 < 1 or self.p2 < 1:
            raise ValueError(f"dimensions must be >= 1, got ({self.p1}, {self.p2})")

    @property
    def p(self) -> int:
        return self.p1 * self.p2


class SpdMatrix:
    """Symmetric positive-definite matrix with a cached lower Cholesky factor.

    The input is symmetrized on construction, (M + M^T)/2, to absorb
    floating-point drift from accumulated updates.  Construction fails with
    :class:`NotPositiveDefiniteError` if any Cholesky pivot is non-positive;
    no jitter is ever added silently.
    """

    __slots__ = ("entries", "dim", "_chol", "_inv")

    def __init__(self, entries: NDArray, _chol: NDArray | None = None):
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("matrix has non-finite entries")
        sym = (entries + entries.T) / 2.0
        sym.flags.writeable = False
        object.__setattr__(self, "entries", sym)
        object.__setattr__(self, "dim", sym.shape[0])
        object.__setattr__(self, "_chol", _chol)
        object.__setattr__(self, "_inv", None)

    def __setattr__(self, name, value):
        raise AttributeError("SpdMatrix is immutable")

    @property
    def chol(self) -> NDArray:
        """Lower-triangular factor L with L L^T = entries (computed once)."""
        if self._chol is None:
            try:
                L = np.linalg.cholesky(self.entries)
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefiniteError(
                    f"matrix of dim {self.dim} is not positive definite"
                ) from exc
            object.__setattr__(self, "_chol", L)
        return self._chol

    @classmethod
    def identity(cls, dim: int) -> "SpdMatrix":
        eye = np.eye(dim)
        return cls(eye, _chol=eye.copy())

    def scaled(self, c: float) -> "SpdMatrix":
        """Return c * self for c > 0, reusing the cached factor if present."""
        if c <= 0:
            raise ValueError("scale factor must be positive")
        chol = None if self._chol is None else np.sqrt(c) * self._chol
        return SpdMatrix(c * self.entries, _chol=chol)

    def solve(self, B: NDArray) -> NDArray:
        """Solve self @ X = B through the triangular factor."""
        return cho_solve((self.chol, True), np.asarray(B, dtype=float), check_finite=False)

    def inv(self) -> "SpdMatrix":
        """Explicit inverse as an SpdMatrix (via triangular solves, cached)."""
        if self._inv is None:
            object.__setattr__(self, "_inv", SpdMatrix(self.solve(np.eye(self.dim))))
        return self._inv

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim})"


def kron(A: NDArray, B: NDArray) -> NDArray:
    """Kronecker product A (x) B; block (i, j) equals A[i, j] * B.

    Convention throughout: column covariance on the left, row covariance on
    the right, so a separable p x p covariance is kron(C, R) with C p2 x p2
    and R p1 x p1.
    """
    return np.kron(np.asarray(A, dtype=float), np.asarray(B, dtype=float))


def vec(M: NDArray) -> NDArray:
    """Stack the columns of M into a single vector."""
    return np.asarray(M, dtype=float).reshape(-1, order="F")


def unvec(v: NDArray, p1: int, p2: int) -> NDArray:
    """Inverse of :func:`vec`: reshape a length p1*p2 vector to p1 x p2."""
    v = np.asarray(v, dtype=float)
    if v.size != p1 * p2:
        raise ValueError(f"vector of length {v.size} cannot unvec to ({p1}, {p2})")
    return v.reshape((p1, p2), order="F")


def chol_column_expansion(S: SpdMatrix, shape: MatrixShape) -> NDArray:
    """Expand S = sum_k vec(L_k) vec(L_k)^T with L_k = unvec of the k-th
    column of the lower Cholesky factor of S.

    Returns an array of shape (p, p1, p2).
    """
    if S.dim != shape.p:
        raise ValueError(f"SPD dim {S.dim} does not match shape p={shape.p}")
    L = S.chol
    # column k -> p1 x p2 matrix in column-stacking order
    return L.T.reshape(shape.p, shape.p2, shape.p1).transpose(0, 2, 1)


def solve_spd(S: SpdMatrix, B: NDArray) -> NDArray:
    """Solve S @ X = B using the cached triangular factor of S."""
    return S.solve(B)


def logdet_spd(S: SpdMatrix) -> float:
    """log|S| as twice the log-trace of the Cholesky diagonal."""
    return S.logdet()


def spd_from_inverse_sum(M: NDArray) -> SpdMatrix:
    """SpdMatrix equal to M^{-1} for symmetric PD M given as a raw array.

    Convenience used by the conjugate updates, which all accumulate a
    precision-like matrix and need its inverse as a Wishart scale.
    """
    Msym = SpdMatrix(M)
    return Msym.inv()


def mah_sq(S: SpdMatrix, X: NDArray) -> NDArray:
    """Row-wise squared Mahalanobis norms x^T S^{-1} x for rows x of X."""
    W = solve_triangular(
        S.chol, np.asarray(X, dtype=float).T, lower=True, check_finite=False
    )
    return np.sum(W * W, axis=0)
