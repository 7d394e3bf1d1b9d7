"""Baseline covariance estimators and posterior point estimation.

Sample covariances use the divisor n (MLE convention) and assume the data
were centered upstream.  The separable MLE uses the standard flip-flop
alternation with the scale ambiguity fixed by normalizing R[0, 0] = 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from swagcov.data import GroupedDataset
from swagcov.linalg import MatrixShape, SpdMatrix
from swagcov.randdist import logpdf_matrix_t
from swagcov.sampler import ChainOutput


@dataclass
class EstimatorResult:
    """Per-group covariance estimates plus a method tag."""

    estimates: list[SpdMatrix]
    method: str
    metadata: dict = field(default_factory=dict)

    @property
    def n_groups(self) -> int:
        return len(self.estimates)


def sample_cov(Y: NDArray) -> NDArray:
    """Group sample covariance sum_i y_i y_i^T / n (pre-centered data).

    Returned as a plain symmetric array: it is rank-deficient when n < p, so
    PD wrapping is left to the caller.
    """
    Y = np.asarray(Y, dtype=float)
    S = Y.T @ Y / Y.shape[0]
    return (S + S.T) / 2.0


def pooled_sample_cov(data: GroupedDataset) -> NDArray:
    """Pooled MLE: all cross products divided by the total sample size."""
    Ys = data.matrices()
    total = sum(Y.shape[0] for Y in Ys)
    S = sum(Y.T @ Y for Y in Ys) / total
    return (S + S.T) / 2.0


@dataclass
class FlipFlopResult:
    R: SpdMatrix  # p1 x p1 row factor, normalized so R[0, 0] = 1
    C: SpdMatrix  # p2 x p2 column factor (carries the scale)
    iterations: int
    converged: bool
    loglik: float

    def product(self) -> SpdMatrix:
        return SpdMatrix(np.kron(self.C.entries, self.R.entries))


def _flipflop(T: NDArray, tol: float, max_iter: int) -> FlipFlopResult:
    """Alternating conditional MLEs on an (n, p1, p2) stack of matrices."""
    n, p1, p2 = T.shape
    if n * p2 <= p1 or n * p1 <= p2:
        raise ValueError(
            f"flip-flop needs n*p2 > p1 and n*p1 > p2; got n={n}, p1={p1}, p2={p2}"
        )
    C = SpdMatrix.identity(p2)
    R = SpdMatrix.identity(p1)
    prev_ll = -np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        Rm = np.einsum("nab,bc,ndc->ad", T, C.inv().entries, T) / (n * p2)
        R = SpdMatrix(Rm)
        Cm = np.einsum("nab,ac,ncd->bd", T, R.inv().entries, T) / (n * p1)
        C = SpdMatrix(Cm)
        # profile log-likelihood (2*pi constant dropped); the trace term is
        # exactly n*p at each conditional optimum
        ll = -0.5 * n * (p2 * R.logdet() + p1 * C.logdet()) - 0.5 * n * p1 * p2
        if np.isfinite(prev_ll):
            if ll < prev_ll - 1e-8 * max(1.0, abs(prev_ll)):
                raise RuntimeError("flip-flop log-likelihood decreased")
            if abs(ll - prev_ll) <= tol * max(1.0, abs(prev_ll)):
                converged = True
                prev_ll = ll
                break
        prev_ll = ll
    if not converged:
        warnings.warn(f"flip-flop did not converge in {max_iter} iterations")
    c = R.entries[0, 0]
    return FlipFlopResult(
        R=R.scaled(1.0 / c),
        C=C.scaled(c),
        iterations=it,
        converged=converged,
        loglik=prev_ll,
    )


def kron_mle_flipflop(
    Y: NDArray, shape: MatrixShape, tol: float = 1e-8, max_iter: int = 200
) -> FlipFlopResult:
    """Separable MLE for one group of vectorized observations (n, p)."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    T = Y.reshape(n, shape.p2, shape.p1).transpose(0, 2, 1)  # undo column stacking
    return _flipflop(T, tol, max_iter)


def pooled_kron_mle(
    data: GroupedDataset, tol: float = 1e-8, max_iter: int = 200
) -> FlipFlopResult:
    """Separable MLE over the union of all groups' observations."""
    Y = np.vstack(data.matrices())
    return kron_mle_flipflop(Y, data.shape, tol=tol, max_iter=max_iter)


def partial_pool_blend(
    data: GroupedDataset,
    nu: int | None = None,
    Psi0: SpdMatrix | None = None,
) -> EstimatorResult:
    """Partial-pooling blend w1*S_j + (1-w1)*Psi0, w1 = n_j/(n_j+nu-p-1).

    Psi0 defaults to the pooled sample covariance.  When nu is not given it
    is chosen by a grid search over [p+2, 4p] maximizing the product over
    groups of the inverse-Wishart predictive likelihood of the group data
    (a plug-in empirical-Bayes surrogate).
    """
    p = data.shape.p
    if Psi0 is None:
        Psi0 = SpdMatrix(pooled_sample_cov(data))
    if nu is None:
        best = None
        for cand in range(p + 2, 4 * p + 1):
            scale = Psi0.scaled(float(cand - p - 1))
            ll = sum(
                logpdf_matrix_t(Y, cand - p + 1, np.zeros_like(Y), scale)
                for Y in data.matrices()
            )
            if best is None or ll > best[1]:
                best = (cand, ll)
        nu = best[0]
    elif nu <= p + 1:
        raise ValueError(f"nu must exceed p+1 = {p + 1}, got {nu}")
    estimates = []
    for Y in data.matrices():
        n = Y.shape[0]
        w1 = n / (n + nu - p - 1)
        estimates.append(SpdMatrix(w1 * sample_cov(Y) + (1.0 - w1) * Psi0.entries))
    return EstimatorResult(estimates, "blend", {"nu": nu})


def bayes_stein_estimate(chain: ChainOutput) -> EstimatorResult:
    """Bayes estimate under Stein's loss: invert the posterior mean of the
    draw inverses, per group."""
    if chain.n_draws < 1:
        raise ValueError("chain has no retained draws")
    estimates = []
    for j in range(chain.n_groups):
        acc = np.zeros_like(chain.sigma_draws[0, j])
        for s in range(chain.n_draws):
            acc += SpdMatrix(chain.sigma_draws[s, j]).inv().entries
        estimates.append(SpdMatrix(acc / chain.n_draws).inv())
    return EstimatorResult(estimates, "swag", {"n_draws": chain.n_draws})
