"""Random samplers and log-densities for the model's distribution families.

All samplers are pure functions of (parameters, RngStream): fixing the stream
fixes the output bit-exactly, and distinct stream ids give independent draws.
Wishart sampling uses the Bartlett decomposition (triangular factor with
chi-distributed diagonal), which is exact and rejection-free.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray
from scipy.special import betaln, multigammaln
from scipy.stats import nbinom

from swagcov.linalg import SpdMatrix


class RngStream:
    """Reproducible random stream keyed by (seed, stream id).

    Identical (seed, stream) reproduce an identical draw sequence; distinct
    stream ids (or distinct ``child`` keys) give statistically independent
    streams derived from the same seed.
    """

    def __init__(self, seed: int, stream: int = 0, _key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.stream = int(stream)
        self._key = tuple(int(k) for k in _key)
        ss = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream,) + self._key
        )
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, *key: int) -> "RngStream":
        """Independent stream deterministically derived from this one's identity."""
        return RngStream(self.seed, self.stream, self._key + key)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream}, key={self._key})"


def sample_wishart(scale: SpdMatrix, dof: float, rng: RngStream) -> SpdMatrix:
    """Draw W ~ Wishart_d(scale, dof) with E[W] = dof * scale.

    Requires dof > d - 1.  Bartlett construction: W = (L A)(L A)^T with L the
    Cholesky factor of the scale and A lower triangular with chi-distributed
    diagonal and standard-normal subdiagonal.
    """
    d = scale.dim
    if dof <= d - 1:
        raise ValueError(f"Wishart dof must exceed d-1={d - 1}, got {dof}")
    gen = rng.generator
    A = np.zeros((d, d))
    idx = np.tril_indices(d, k=-1)
    A[idx] = gen.standard_normal(idx[0].size)
    A[np.diag_indices(d)] = np.sqrt(gen.chisquare(dof - np.arange(d)))
    F = scale.chol @ A
    return SpdMatrix(F @ F.T)


def sample_inv_wishart(meanlike: SpdMatrix, dof: float, rng: RngStream) -> SpdMatrix:
    """Draw S with S^{-1} ~ Wishart_d(meanlike^{-1}/(dof-d-1), dof).

    Parameterized so that E[S] = meanlike, which requires dof > d + 1.
    """
    d = meanlike.dim
    if dof <= d + 1:
        raise ValueError(f"inverse-Wishart dof must exceed d+1={d + 1}, got {dof}")
    scale = meanlike.inv().scaled(1.0 / (dof - d - 1))
    return sample_wishart(scale, dof, rng).inv()


def sample_inv_wishart_natural(inner: SpdMatrix, dof: float, rng: RngStream) -> SpdMatrix:
    """Draw S with S^{-1} ~ Wishart_d(inner^{-1}, dof).

    Natural form used by the conjugate updates, which accumulate ``inner``
    directly (e.g. a Gram matrix plus a prior term).
    """
    return sample_wishart(inner.inv(), dof, rng).inv()


def sample_matrix_normal(
    mean: NDArray,
    rowcov: SpdMatrix | None,
    colcov: SpdMatrix,
    rng: RngStream,
) -> NDArray:
    """Draw X with vec(X) ~ N(vec(mean), colcov (x) rowcov).

    Generated as mean + A Z B^T with A, B the triangular factors of the row
    and column covariances.  ``rowcov=None`` means the identity.
    """
    mean = np.asarray(mean, dtype=float)
    n, d = mean.shape
    if colcov.dim != d or (rowcov is not None and rowcov.dim != n):
        raise ValueError("covariance dimensions do not conform with the mean")
    Z = rng.generator.standard_normal((n, d))
    X = Z @ colcov.chol.T
    if rowcov is not None:
        X = rowcov.chol @ X
    return mean + X


def logpdf_matrix_t(
    X: NDArray,
    dof: float,
    mean: NDArray,
    colscale: SpdMatrix,
    rowscale: SpdMatrix | None = None,
) -> float:
    """Log density of the n x d matrix-t with vec-scale colscale (x) rowscale.

    The distribution is the marginal of X | V with rows of (X - mean) i.i.d.
    N_d(0, V), V^{-1} ~ Wishart_d(colscale^{-1}/(a - d - 1), a), a = dof+d-1,
    generalized to a non-identity row scale.  The constant convention is
    internally consistent across dof values, which is all the acceptance
    ratios require.  The Gram determinant is evaluated in whichever of the
    two dimensions (n or d) is smaller.
    """
    X = np.asarray(X, dtype=float)
    mean = np.asarray(mean, dtype=float)
    n, d = X.shape
    if dof <= 0:
        raise ValueError(f"matrix-t dof must be positive, got {dof}")
    a = dof + d - 1
    R = X - mean
    if rowscale is not None:
        R = np.linalg.solve(rowscale.chol, R)  # whitened residual rows
        ld_row = rowscale.logdet()
    else:
        ld_row = 0.0
    ld_S = colscale.logdet()
    if n < d:
        # |S + R^T R| = |S| * |I_n + R S^{-1} R^T|
        G = np.eye(n) + R @ colscale.solve(R.T)
        sign, ld_G = np.linalg.slogdet(G)
        if sign <= 0:
            raise ValueError("Gram matrix is not positive definite")
        ld_big = ld_S + ld_G
    else:
        sign, ld_big = np.linalg.slogdet(colscale.entries + R.T @ R)
        if sign <= 0:
            raise ValueError("Gram matrix is not positive definite")
    return (
        -0.5 * n * d * np.log(np.pi)
        - 0.5 * d * ld_row
        + multigammaln(0.5 * (a + n), d)
        - multigammaln(0.5 * a, d)
        + 0.5 * a * ld_S
        - 0.5 * (a + n) * ld_big
    )


def logpdf_wishart(X: SpdMatrix, scale: SpdMatrix, dof: float) -> float:
    """Log density of Wishart_d(scale, dof) at X (E[X] = dof * scale)."""
    d = X.dim
    if dof <= d - 1:
        raise ValueError(f"Wishart dof must exceed d-1={d - 1}, got {dof}")
    return (
        0.5 * (dof - d - 1) * X.logdet()
        - 0.5 * float(np.trace(scale.solve(X.entries)))
        - 0.5 * dof * d * np.log(2.0)
        - 0.5 * dof * scale.logdet()
        - multigammaln(0.5 * dof, d)
    )


def logpmf_negbin_trunc(k: int, r0: float, p0: float, lower: int) -> float:
    """Log pmf of a negative binomial shifted so its support starts at ``lower``.

    k = lower + NB(r0, p0) where NB counts failures, so the mean of the
    shifted variable is lower + r0 (1 - p0) / p0.  Values below the support
    return -inf rather than raising.
    """
    if r0 <= 0 or not (0.0 < p0 < 1.0):
        raise ValueError("need r0 > 0 and p0 in (0, 1)")
    if k < lower:
        return -np.inf
    return float(nbinom.logpmf(k - lower, r0, p0))


def logpdf_beta(x: float, alpha: float, beta: float) -> float:
    """Standard Beta(alpha, beta) log density; -inf outside (0, 1)."""
    if alpha <= 0 or beta <= 0:
        raise ValueError("Beta parameters must be positive")
    if not (0.0 < x < 1.0):
        return -np.inf
    return (alpha - 1.0) * np.log(x) + (beta - 1.0) * np.log1p(-x) - betaln(alpha, beta)
