"""Metropolis-within-Gibbs sampler for the SWAG hierarchical covariance model.

Each group's covariance is the blend Sigma_j = lam * Psi_j + (1 - lam) *
Lambda_j, with Psi_j shrunk across groups towards a pooled covariance Psi_0
and Lambda_j shrunk within each group towards a Kronecker covariance
C_j (x) R_j; Psi_0 itself is shrunk towards a pooled Kronecker P_2 (x) P_1.

One sweep updates, in order:
  (lam, U) -> (nu, Psi) -> (gamma, Lambda) -> (R, C) -> (Psi_0, P_1, P_2, xi)
The weight lam and the integer degrees of freedom move through reflecting
random-walk Metropolis steps; everything else is a conjugate draw.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from swagcov.data import GroupedDataset
from swagcov.linalg import (
    MatrixShape,
    NotPositiveDefiniteError,
    SpdMatrix,
    chol_column_expansion,
    kron,
)
from swagcov.randdist import (
    RngStream,
    logpdf_matrix_t,
    logpdf_wishart,
    logpmf_negbin_trunc,
    sample_inv_wishart_natural,
    sample_matrix_normal,
    sample_wishart,
)


def default_p0(p: int) -> float:
    """Negative-binomial success probability default; smaller for large p
    so the degrees-of-freedom prior keeps substantial dispersion."""
    return 0.2 if p <= 64 else 0.01


def default_r0(p: int, p0: float) -> float:
    """Size parameter putting the prior dof mean near the first quartile of
    [p+2, 2p]."""
    return max(0.5, 0.25 * (p - 2)) * p0 / (1.0 - p0)


@dataclass
class SwagConfig:
    """Hyperparameters, proposal step sizes, and chain schedule.

    Fields left as None are resolved against the data's matrix shape by
    :meth:`resolve`: diffuse Wishart dofs eta = dim + 2, identity scale and
    mean hyperparameters, and negative-binomial (r0, p0) placing most prior
    dof mass in [p+2, 2p].
    """

    iterations: int = 28_000
    burn_in: int = 3_000
    thin: int = 10
    seed: int = 0
    alpha: float = 0.5
    beta: float = 0.5
    r0: float | None = None
    p0: float | None = None
    eta1: float | None = None
    eta2: float | None = None
    eta3: float | None = None
    eta4: float | None = None
    R0: SpdMatrix | None = None
    C0: SpdMatrix | None = None
    P01: SpdMatrix | None = None
    P02: SpdMatrix | None = None
    delta_lambda: float = 0.1
    delta_nu: float | None = None
    delta_gamma: float | None = None
    delta_xi: float | None = None
    keep_components: bool = False

    def resolve(self, shape: MatrixShape) -> "SwagConfig":
        """Fill shape-dependent defaults and validate all invariants."""
        if self.R0 is not None and self.delta_xi is not None and self.r0 is not None:
            return self  # already resolved (and validated) against this shape
        p, p1, p2 = shape.p, shape.p1, shape.p2
        p0 = self.p0 if self.p0 is not None else default_p0(p)
        r0 = self.r0 if self.r0 is not None else default_r0(p, p0)
        delta_dof = float(max(2, round(p / 4)))
        cfg = replace(
            self,
            r0=r0,
            p0=p0,
            eta1=self.eta1 if self.eta1 is not None else p1 + 2,
            eta2=self.eta2 if self.eta2 is not None else p2 + 2,
            eta3=self.eta3 if self.eta3 is not None else p1 + 2,
            eta4=self.eta4 if self.eta4 is not None else p2 + 2,
            R0=self.R0 if self.R0 is not None else SpdMatrix.identity(p1),
            C0=self.C0 if self.C0 is not None else SpdMatrix.identity(p2),
            P01=self.P01 if self.P01 is not None else SpdMatrix.identity(p1),
            P02=self.P02 if self.P02 is not None else SpdMatrix.identity(p2),
            delta_nu=self.delta_nu if self.delta_nu is not None else delta_dof,
            delta_gamma=self.delta_gamma if self.delta_gamma is not None else delta_dof,
            delta_xi=self.delta_xi if self.delta_xi is not None else delta_dof,
        )
        if not (cfg.eta1 >= p1 + 2 and cfg.eta3 >= p1 + 2):
            raise ValueError(f"eta1, eta3 must be >= p1+2 = {p1 + 2}")
        if not (cfg.eta2 >= p2 + 2 and cfg.eta4 >= p2 + 2):
            raise ValueError(f"eta2, eta4 must be >= p2+2 = {p2 + 2}")
        if cfg.thin < 1:
            raise ValueError("thin must be >= 1")
        if not (0 <= cfg.burn_in < cfg.iterations):
            raise ValueError("need 0 <= burn_in < iterations")
        for name in ("delta_lambda", "delta_nu", "delta_gamma", "delta_xi"):
            if getattr(cfg, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if cfg.r0 <= 0 or not (0 < cfg.p0 < 1):
            raise ValueError("need r0 > 0 and p0 in (0, 1)")
        if cfg.R0.dim != p1 or cfg.P01.dim != p1 or cfg.C0.dim != p2 or cfg.P02.dim != p2:
            raise ValueError("scale hyperparameter dimensions do not match the shape")
        return cfg


@dataclass
class SwagState:
    """One state of the Markov chain."""

    lam: float
    U: list[NDArray]
    Psi: list[SpdMatrix]
    Lambda: list[SpdMatrix]
    Psi0: SpdMatrix
    nu: int
    gamma: int
    xi: int
    R: list[SpdMatrix]
    C: list[SpdMatrix]
    P1: SpdMatrix
    P2: SpdMatrix

    def sigma(self, j: int) -> SpdMatrix:
        """Group j's implied covariance lam*Psi_j + (1-lam)*Lambda_j."""
        return SpdMatrix(
            self.lam * self.Psi[j].entries + (1.0 - self.lam) * self.Lambda[j].entries
        )


@dataclass
class ChainOutput:
    """Thinned posterior draws plus per-step acceptance rates."""

    sigma_draws: NDArray  # (n_draws, J, p, p)
    lam_draws: NDArray
    nu_draws: NDArray
    gamma_draws: NDArray
    xi_draws: NDArray
    acceptance_rates: dict[str, float]
    iterations: int
    burn_in: int
    thin: int
    shape: MatrixShape
    group_labels: list[str]
    components: dict[str, NDArray] | None = None

    @property
    def n_draws(self) -> int:
        return self.sigma_draws.shape[0]

    @property
    def n_groups(self) -> int:
        return self.sigma_draws.shape[1]


def _n_threads() -> int:
    try:
        return max(0, int(os.environ.get("SWAG_THREADS", "0")))
    except ValueError:
        return 0


def _map_groups(fn, n: int) -> list:
    k = _n_threads()
    if k <= 1 or n <= 1:
        return [fn(j) for j in range(n)]
    with ThreadPoolExecutor(max_workers=min(k, n)) as ex:
        return list(ex.map(fn, range(n)))


def initialize_state(data: GroupedDataset, config: SwagConfig) -> SwagState:
    """Deterministic starting state (no RNG consumed).

    Covariance components start at the diagonal of the pooled sample
    covariance (plus a small ridge), Kronecker factors at the identity, and
    the degrees of freedom at their prior mean.
    """
    shape = data.shape
    cfg = config.resolve(shape)
    p, p1, p2 = shape.p, shape.p1, shape.p2
    Ys = data.matrices()
    n_total = sum(Y.shape[0] for Y in Ys)
    pooled_diag = sum(np.sum(Y * Y, axis=0) for Y in Ys) / n_total
    start_cov = SpdMatrix(np.diag(pooled_diag + 1e-6))
    dof0 = p + 2 + int(round(cfg.r0 * (1.0 - cfg.p0) / cfg.p0))
    lam = 0.5
    J = len(Ys)
    return SwagState(
        lam=lam,
        U=[np.sqrt(lam) * Y for Y in Ys],
        Psi=[start_cov] * J,
        Lambda=[start_cov] * J,
        Psi0=start_cov,
        nu=dof0,
        gamma=dof0,
        xi=dof0,
        R=[SpdMatrix.identity(p1)] * J,
        C=[SpdMatrix.identity(p2)] * J,
        P1=SpdMatrix.identity(p1),
        P2=SpdMatrix.identity(p2),
    )


def _accept(log_ratio: float, rng: RngStream) -> bool:
    # a -inf proposal target never accepts; the uniform is always consumed
    # so acceptance does not perturb the downstream draw sequence
    u = rng.generator.uniform()
    if not np.isfinite(log_ratio):
        return log_ratio > 0
    return np.log(u) < log_ratio


def _lambda_logtarget(lam: float, state: SwagState, Ys: list[NDArray], cfg: SwagConfig) -> float:
    if not (0.0 < lam < 1.0):
        return -np.inf
    total = (cfg.alpha - 1.0) * np.log(lam) + (cfg.beta - 1.0) * np.log1p(-lam)
    for j, Y in enumerate(Ys):
        try:
            Sig = SpdMatrix(
                lam * state.Psi[j].entries + (1.0 - lam) * state.Lambda[j].entries
            )
            total += -0.5 * Y.shape[0] * Sig.logdet()
            total += -0.5 * float(np.sum(Y * Sig.solve(Y.T).T))
        except NotPositiveDefiniteError:
            return -np.inf
    return total


def _reflect_unit(x: float) -> float:
    if x <= 0.0:
        return -x
    if x >= 1.0:
        return 2.0 - x
    return x


def _propose_dof(current: int, delta: float, lower: int, rng: RngStream) -> int:
    x = rng.generator.uniform(current - delta, current + delta)
    if x < lower:
        x = lower + (lower - x)
    return int(np.rint(x))


def update_lambda_and_U(
    state: SwagState, data: GroupedDataset, config: SwagConfig, rng: RngStream
) -> tuple[SwagState, bool]:
    """Reflecting-uniform Metropolis step on lam, then exact redraw of every
    latent factor U_j from its matrix-normal full conditional.

    Returns the new state and whether the lam proposal was accepted.
    """
    cfg = config.resolve(data.shape)
    Ys = data.matrices()
    gen = rng.generator
    prop = _reflect_unit(gen.uniform(state.lam - cfg.delta_lambda, state.lam + cfg.delta_lambda))
    logr = _lambda_logtarget(prop, state, Ys, cfg) - _lambda_logtarget(
        state.lam, state, Ys, cfg
    )
    accepted = _accept(logr, rng.child(0))
    lam = prop if accepted else state.lam

    w = lam / (1.0 - lam)

    def draw_u(j: int) -> NDArray:
        prec = state.Psi[j].inv().entries + w * state.Lambda[j].inv().entries
        S = SpdMatrix(prec).inv()
        M = (np.sqrt(lam) / (1.0 - lam)) * Ys[j] @ state.Lambda[j].solve(S.entries)
        return sample_matrix_normal(M, None, S, rng.child(1 + j))

    U = _map_groups(draw_u, len(Ys))
    return replace(state, lam=lam, U=U), accepted


def update_nu_psi(
    state: SwagState, data: GroupedDataset, config: SwagConfig, rng: RngStream
) -> tuple[SwagState, bool]:
    """Metropolis step on nu using the matrix-t marginal of the latent
    factors (Psi marginalized out), then exact conjugate redraws of each
    Psi_j."""
    shape = data.shape
    cfg = config.resolve(shape)
    p = shape.p
    lower = p + 2
    prop = _propose_dof(state.nu, cfg.delta_nu, lower, rng)

    def logtarget(nu: int) -> float:
        t = logpmf_negbin_trunc(nu, cfg.r0, cfg.p0, lower)
        if not np.isfinite(t):
            return -np.inf
        S = state.Psi0.scaled(float(nu - p - 1))
        zero = None
        for U in state.U:
            if zero is None or zero.shape != U.shape:
                zero = np.zeros_like(U)
            t += logpdf_matrix_t(U, nu - p + 1, zero, S)
        return t

    if prop == state.nu:
        accepted = True
        rng.child(0).generator.uniform()  # keep the stream layout fixed
    else:
        accepted = _accept(logtarget(prop) - logtarget(state.nu), rng.child(0))
    nu = prop if accepted else state.nu

    def draw_psi(j: int) -> SpdMatrix:
        U = state.U[j]
        inner = SpdMatrix(U.T @ U + (nu - p - 1) * state.Psi0.entries)
        return sample_inv_wishart_natural(inner, nu + U.shape[0], rng.child(1 + j))

    Psi = _map_groups(draw_psi, len(state.U))
    return replace(state, nu=nu, Psi=Psi), accepted


def update_gamma_lambda(
    state: SwagState, data: GroupedDataset, config: SwagConfig, rng: RngStream
) -> tuple[SwagState, bool]:
    """Metropolis step on gamma using the matrix-t marginal of the data given
    the latent factors, then exact conjugate redraws of each Lambda_j."""
    shape = data.shape
    cfg = config.resolve(shape)
    p = shape.p
    lower = p + 2
    Ys = data.matrices()
    lam = state.lam
    Ks = [
        SpdMatrix(kron(state.C[j].entries, state.R[j].entries))
        for j in range(len(Ys))
    ]
    prop = _propose_dof(state.gamma, cfg.delta_gamma, lower, rng)

    def logtarget(g: int) -> float:
        t = logpmf_negbin_trunc(g, cfg.r0, cfg.p0, lower)
        if not np.isfinite(t):
            return -np.inf
        c = (1.0 - lam) * (g - p - 1)
        for j, Y in enumerate(Ys):
            t += logpdf_matrix_t(
                Y, g - p + 1, np.sqrt(lam) * state.U[j], Ks[j].scaled(c)
            )
        return t

    if prop == state.gamma:
        accepted = True
        rng.child(0).generator.uniform()
    else:
        accepted = _accept(logtarget(prop) - logtarget(state.gamma), rng.child(0))
    gamma = prop if accepted else state.gamma

    def draw_lambda(j: int) -> SpdMatrix:
        resid = Ys[j] - np.sqrt(lam) * state.U[j]
        inner = SpdMatrix(
            resid.T @ resid / (1.0 - lam) + (gamma - p - 1) * Ks[j].entries
        )
        return sample_inv_wishart_natural(inner, gamma + Ys[j].shape[0], rng.child(1 + j))

    Lam = _map_groups(draw_lambda, len(Ys))
    return replace(state, gamma=gamma, Lambda=Lam), accepted


def update_R_C(
    state: SwagState, data: GroupedDataset, config: SwagConfig, rng: RngStream
) -> SwagState:
    """Exact conjugate draws of each group's Kronecker factors, R_j first and
    then C_j given the fresh R_j, through the Cholesky column expansion of
    Lambda_j^{-1}."""
    shape = data.shape
    cfg = config.resolve(shape)
    p, p1, p2 = shape.p, shape.p1, shape.p2
    g = state.gamma
    R0inv = cfg.R0.inv().entries
    C0inv = cfg.C0.inv().entries

    def draw_rc(j: int) -> tuple[SpdMatrix, SpdMatrix]:
        Ls = chol_column_expansion(state.Lambda[j].inv(), shape)
        mr = (g - p - 1) * np.einsum(
            "kab,bc,kdc->ad", Ls, state.C[j].entries, Ls
        ) + cfg.eta1 * R0inv
        R = sample_wishart(SpdMatrix(mr).inv(), cfg.eta1 + g * p2, rng.child(j, 0))
        mc = (g - p - 1) * np.einsum(
            "kab,ac,kcd->bd", Ls, R.entries, Ls
        ) + cfg.eta2 * C0inv
        C = sample_wishart(SpdMatrix(mc).inv(), cfg.eta2 + g * p1, rng.child(j, 1))
        return R, C

    out = _map_groups(draw_rc, len(state.R))
    return replace(state, R=[rc[0] for rc in out], C=[rc[1] for rc in out])


def update_psi0_P_xi(
    state: SwagState, data: GroupedDataset, config: SwagConfig, rng: RngStream
) -> tuple[SwagState, bool]:
    """Exact conjugate draws of the pooled covariance Psi_0 and its Kronecker
    factors P_1, P_2, then a Metropolis step on xi.

    The P_1 / P_2 full conditionals use the Cholesky column expansion of
    Psi_0 itself: Psi_0 carries a Wishart prior, so its density traces
    (P_2 (x) P_1)^{-1} against Psi_0, not against Psi_0^{-1}.
    """
    shape = data.shape
    cfg = config.resolve(shape)
    p, p1, p2 = shape.p, shape.p1, shape.p2
    J = len(state.Psi)
    nu, xi = state.nu, state.xi

    prec_sum = sum(Ps.inv().entries for Ps in state.Psi)
    kron_prec = kron(state.P2.inv().entries, state.P1.inv().entries)
    inner0 = SpdMatrix((nu - p - 1) * prec_sum + xi * kron_prec)
    Psi0 = sample_wishart(inner0.inv(), xi + J * nu, rng.child(0))

    Ls = chol_column_expansion(Psi0, shape)
    m1 = xi * np.einsum(
        "kab,bc,kdc->ad", Ls, state.P2.inv().entries, Ls
    ) + (cfg.eta3 - p1 - 1) * cfg.P01.entries
    P1 = sample_inv_wishart_natural(SpdMatrix(m1), cfg.eta3 + xi * p2, rng.child(1))
    m2 = xi * np.einsum(
        "kab,ac,kcd->bd", Ls, P1.inv().entries, Ls
    ) + (cfg.eta4 - p2 - 1) * cfg.P02.entries
    P2 = sample_inv_wishart_natural(SpdMatrix(m2), cfg.eta4 + xi * p1, rng.child(2))

    lower = p + 2
    prop = _propose_dof(xi, cfg.delta_xi, lower, rng)
    K = SpdMatrix(kron(P2.entries, P1.entries))

    def logtarget(x: int) -> float:
        t = logpmf_negbin_trunc(x, cfg.r0, cfg.p0, lower)
        if not np.isfinite(t):
            return -np.inf
        return t + logpdf_wishart(Psi0, K.scaled(1.0 / x), x)

    if prop == xi:
        accepted = True
        rng.child(3).generator.uniform()
    else:
        accepted = _accept(logtarget(prop) - logtarget(xi), rng.child(3))
    xi_new = prop if accepted else xi

    return replace(state, Psi0=Psi0, P1=P1, P2=P2, xi=xi_new), accepted


def sweep(
    state: SwagState, data: GroupedDataset, config: SwagConfig, rng: RngStream
) -> tuple[SwagState, dict[str, bool]]:
    """One full update sweep; returns the new state and per-step acceptances."""
    state, acc_lam = update_lambda_and_U(state, data, config, rng.child(0))
    state, acc_nu = update_nu_psi(state, data, config, rng.child(1))
    state, acc_gamma = update_gamma_lambda(state, data, config, rng.child(2))
    state = update_R_C(state, data, config, rng.child(3))
    state, acc_xi = update_psi0_P_xi(state, data, config, rng.child(4))
    return state, {"lambda": acc_lam, "nu": acc_nu, "gamma": acc_gamma, "xi": acc_xi}


def run_chain(data: GroupedDataset, config: SwagConfig) -> ChainOutput:
    """Run the full Metropolis-within-Gibbs chain.

    Deterministic given the config seed.  Retains floor((iterations -
    burn_in)/thin) states, recording each retained state's per-group
    Sigma_j = lam*Psi_j + (1-lam)*Lambda_j.
    """
    shape = data.shape
    cfg = config.resolve(shape)
    data.validate()
    J = len(data.groups)
    p = shape.p

    state = initialize_state(data, cfg)
    base = RngStream(cfg.seed)

    n_keep = (cfg.iterations - cfg.burn_in) // cfg.thin
    sigma_draws = np.empty((n_keep, J, p, p))
    lam_draws = np.empty(n_keep)
    nu_draws = np.empty(n_keep, dtype=int)
    gamma_draws = np.empty(n_keep, dtype=int)
    xi_draws = np.empty(n_keep, dtype=int)
    components: dict[str, list] | None = None
    if cfg.keep_components:
        components = {"Psi0": [], "P1": [], "P2": [], "R": [], "C": [], "Psi": [], "Lambda": []}

    acc_counts = {"lambda": 0, "nu": 0, "gamma": 0, "xi": 0}
    kept = 0
    for t in range(1, cfg.iterations + 1):
        state, acc = sweep(state, data, cfg, base.child(t))
        for k, v in acc.items():
            acc_counts[k] += int(v)
        if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0 and kept < n_keep:
            for j in range(J):
                sigma_draws[kept, j] = state.sigma(j).entries
            lam_draws[kept] = state.lam
            nu_draws[kept] = state.nu
            gamma_draws[kept] = state.gamma
            xi_draws[kept] = state.xi
            if components is not None:
                components["Psi0"].append(state.Psi0.entries)
                components["P1"].append(state.P1.entries)
                components["P2"].append(state.P2.entries)
                components["R"].append(np.array([m.entries for m in state.R]))
                components["C"].append(np.array([m.entries for m in state.C]))
                components["Psi"].append(np.array([m.entries for m in state.Psi]))
                components["Lambda"].append(np.array([m.entries for m in state.Lambda]))
            kept += 1

    rates = {k: v / cfg.iterations for k, v in acc_counts.items()}
    packed = None
    if components is not None:
        packed = {k: np.array(v) for k, v in components.items()}
    return ChainOutput(
        sigma_draws=sigma_draws,
        lam_draws=lam_draws,
        nu_draws=nu_draws,
        gamma_draws=gamma_draws,
        xi_draws=xi_draws,
        acceptance_rates=rates,
        iterations=cfg.iterations,
        burn_in=cfg.burn_in,
        thin=cfg.thin,
        shape=shape,
        group_labels=[g.label for g in data.groups],
        components=packed,
    )
