"""Loss functions, simulation regimes, QDA classification, MCMC diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from swagcov.data import Group, GroupedDataset
from swagcov.linalg import MatrixShape, SpdMatrix, mah_sq
from swagcov.randdist import RngStream


def stein_loss(truth: SpdMatrix, estimate: SpdMatrix) -> float:
    """tr(truth^{-1} estimate) - log|truth^{-1} estimate| - p.

    Nonnegative, zero iff the estimate equals the truth, and invariant under
    joint congruence transforms.
    """
    if truth.dim != estimate.dim:
        raise ValueError(f"dimension mismatch: {truth.dim} vs {estimate.dim}")
    tr = float(np.trace(truth.solve(estimate.entries)))
    return tr - (estimate.logdet() - truth.logdet()) - truth.dim


def avg_stein_loss(truths: list[SpdMatrix], estimates: list[SpdMatrix]) -> float:
    if len(truths) != len(estimates):
        raise ValueError("truth / estimate lists differ in length")
    return float(np.mean([stein_loss(t, e) for t, e in zip(truths, estimates)]))


def exch_corr(dim: int, rho: float) -> SpdMatrix:
    """Exchangeable correlation matrix: unit diagonal, rho off-diagonal."""
    if dim > 1 and not (-1.0 / (dim - 1) < rho < 1.0):
        raise ValueError(f"rho={rho} outside the PD range for dim={dim}")
    M = np.full((dim, dim), rho)
    np.fill_diagonal(M, 1.0)
    return SpdMatrix(M)


@dataclass
class Regime:
    """One simulation regime: Ho/He covariance homogeneity across groups,
    Kronecker (K) or unstructured (N) within-group truth."""

    homogeneity: str  # "Ho" | "He"
    structure: str  # "K" | "N"
    J: int
    shape: MatrixShape
    corr_bounds: tuple[float, float] = (0.35, 0.9)
    seed: int = 0

    def __post_init__(self):
        if self.homogeneity not in ("Ho", "He"):
            raise ValueError("homogeneity must be 'Ho' or 'He'")
        if self.structure not in ("K", "N"):
            raise ValueError("structure must be 'K' or 'N'")
        if self.J < 1:
            raise ValueError("J must be >= 1")
        lo, hi = self.corr_bounds
        if not (0.0 < lo <= hi < 1.0):
            raise ValueError("correlation bounds must lie in (0, 1)")


def generate_regime(regime: Regime) -> tuple[list[SpdMatrix], dict]:
    """Draw the regime's true covariances; deterministic given the seed.

    Correlations are drawn once, uniformly within the regime's bounds, per
    needed exchangeable factor (independently for the row and column factors,
    and per group in He regimes).
    """
    gen = RngStream(regime.seed, stream=7).generator
    lo, hi = regime.corr_bounds
    shape = regime.shape
    rho_record: dict[str, float] = {}

    def draw_rho(tag: str) -> float:
        rho = float(gen.uniform(lo, hi))
        rho_record[tag] = rho
        return rho

    if regime.structure == "N":
        if regime.homogeneity == "Ho":
            Z = exch_corr(shape.p, draw_rho("rho"))
            truths = [Z] * regime.J
        else:
            truths = [
                exch_corr(shape.p, draw_rho(f"rho_{j}")) for j in range(regime.J)
            ]
    else:
        if regime.homogeneity == "Ho":
            Zc = exch_corr(shape.p2, draw_rho("rho_col"))
            Zr = exch_corr(shape.p1, draw_rho("rho_row"))
            Z = SpdMatrix(np.kron(Zc.entries, Zr.entries))
            truths = [Z] * regime.J
        else:
            truths = []
            for j in range(regime.J):
                Zc = exch_corr(shape.p2, draw_rho(f"rho_col_{j}"))
                Zr = exch_corr(shape.p1, draw_rho(f"rho_row_{j}"))
                truths.append(SpdMatrix(np.kron(Zc.entries, Zr.entries)))
    return truths, rho_record


def simulate_dataset(
    truths: list[SpdMatrix],
    n_per_group: int | list[int],
    shape: MatrixShape,
    seed: int,
) -> GroupedDataset:
    """Sample mean-zero normal observations per group; rows are vectorized
    p1 x p2 matrices."""
    J = len(truths)
    if isinstance(n_per_group, int):
        ns = [n_per_group] * J
    else:
        ns = list(n_per_group)
        if len(ns) != J:
            raise ValueError("n_per_group length does not match number of truths")
    rng = RngStream(seed, stream=11)
    groups = []
    for j, (Sig, n) in enumerate(zip(truths, ns)):
        Z = rng.child(j).generator.standard_normal((n, shape.p))
        groups.append(Group(f"g{j}", Z @ Sig.chol.T))
    return GroupedDataset(groups, shape)


def qda_score(y: NDArray, mu: NDArray, Sigma: SpdMatrix) -> float:
    """Quadratic discriminant score (y-mu)^T Sigma^{-1} (y-mu) + log|Sigma|."""
    d = np.asarray(y, dtype=float) - np.asarray(mu, dtype=float)
    return float(mah_sq(Sigma, d[None, :])[0]) + Sigma.logdet()


@dataclass
class ConfusionMatrix:
    """Counts with rows = target classes and columns = predictions."""

    labels: list[str]
    counts: NDArray  # (J, J) nonnegative integers

    def correct_rates(self) -> NDArray:
        row_sums = self.counts.sum(axis=1)
        return np.where(row_sums > 0, np.diag(self.counts) / row_sums, 0.0)

    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / float(self.counts.sum())


def qda_classify(
    test: GroupedDataset,
    params: list[tuple[NDArray, SpdMatrix]],
) -> ConfusionMatrix:
    """Assign every test observation to the class minimizing its discriminant
    score; ties break to the lowest class index.

    ``params`` is one (mean vector, covariance) pair per class, aligned with
    the test dataset's group order.
    """
    if len(params) != test.n_groups:
        raise ValueError("need one (mu, Sigma) pair per test group")
    J = len(params)
    logdets = np.array([S.logdet() for _, S in params])
    counts = np.zeros((J, J), dtype=int)
    for tgt, g in enumerate(test.groups):
        scores = np.empty((g.Y.shape[0], J))
        for k, (mu, Sig) in enumerate(params):
            scores[:, k] = mah_sq(Sig, g.Y - np.asarray(mu)) + logdets[k]
        pred = np.argmin(scores, axis=1)  # argmin takes the first minimum
        for k in range(J):
            counts[tgt, k] = int(np.sum(pred == k))
    return ConfusionMatrix(test.labels(), counts)


def autocorr(series: NDArray, lag: int) -> float:
    """Lag-k autocorrelation; nan for a constant series (undefined)."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < lag + 2:
        raise ValueError(f"series of length {n} too short for lag {lag}")
    if np.ptp(x) == 0.0:
        return float("nan")
    x = x - x.mean()
    denom = float(np.sum(x * x))
    if denom == 0.0:
        return float("nan")
    return float(np.sum(x[: n - lag] * x[lag:]) / denom)


def _acf_all(x: NDArray) -> NDArray:
    n = x.size
    x = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conjugate(f), m)[:n]
    if acov[0] == 0.0:
        return np.array([])
    return acov / acov[0]


def ess(series: NDArray) -> float:
    """Effective sample size via Geyer's initial positive sequence.

    The truncated autocorrelation sum stops before the first non-positive
    consecutive-pair sum; the result is capped at the series length, and a
    constant series returns the length by convention.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 2 or np.ptp(x) == 0.0:
        return float(n)
    rho = _acf_all(x)
    if rho.size == 0:
        return float(n)
    tau = 0.0
    m = 0
    while 2 * m + 1 < n:
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        tau += pair
        m += 1
    tau = 2.0 * tau - 1.0
    if tau < 1.0:
        tau = 1.0
    return float(min(n, n / tau))
