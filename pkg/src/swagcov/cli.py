"""Command-line entry points: ``swag fit | simulate | classify | diagnose``.

Configuration files are flat ``key = value`` text with ``#`` comments; all
emitted numbers use 17-significant-digit round-trip formatting so runs with
a fixed seed are byte-reproducible.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from swagcov import __version__
from swagcov.data import (
    FMT,
    Group,
    GroupedDataset,
    center_and_standardize,
    load_dataset,
    read_draws,
    rescale_covariance,
    save_dataset,
    write_draws,
    write_run_manifest,
)
from swagcov.estimators import (
    bayes_stein_estimate,
    kron_mle_flipflop,
    partial_pool_blend,
    pooled_kron_mle,
    pooled_sample_cov,
    sample_cov,
)
from swagcov.evaluation import (
    Regime,
    autocorr,
    avg_stein_loss,
    ess,
    generate_regime,
    qda_classify,
    simulate_dataset,
)
from swagcov.linalg import MatrixShape, SpdMatrix
from swagcov.sampler import SwagConfig, run_chain

_CONFIG_INT_KEYS = {"iterations", "burn_in", "thin", "seed"}
_CONFIG_FLOAT_KEYS = {
    "alpha",
    "beta",
    "r0",
    "p0",
    "eta1",
    "eta2",
    "eta3",
    "eta4",
    "delta_lambda",
    "delta_nu",
    "delta_gamma",
    "delta_xi",
}
_CONFIG_BOOL_KEYS = {"keep_components"}


def load_config(path: str | Path | None) -> SwagConfig:
    """Parse a flat key = value config file into a SwagConfig."""
    cfg = SwagConfig()
    if path is None:
        return cfg
    kwargs = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in _CONFIG_INT_KEYS:
            kwargs[key] = int(val)
        elif key in _CONFIG_FLOAT_KEYS:
            kwargs[key] = float(val)
        elif key in _CONFIG_BOOL_KEYS:
            kwargs[key] = val.lower() in ("1", "true", "yes", "on")
        else:
            raise ValueError(f"{path}:{lineno}: unknown config key '{key}'")
    return SwagConfig(**kwargs)


def _config_echo(cfg: SwagConfig) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None or isinstance(v, (int, float, bool)):
            out[f"config.{f.name}"] = v
    return out


def _write_estimate(path: Path, label: str, shape: MatrixShape, M: np.ndarray) -> None:
    header = f"label={label} p={shape.p} p1={shape.p1} p2={shape.p2}"
    np.savetxt(path, M, fmt=FMT, delimiter=",", header=header)


def _chain_diagnostics(sigma_draws: np.ndarray) -> dict:
    """ESS and lag-10 autocorrelation over the unique covariance elements."""
    n_draws, J, p, _ = sigma_draws.shape
    iu = np.triu_indices(p)
    ess_vals, ac_vals = [], []
    for j in range(J):
        series = sigma_draws[:, j, iu[0], iu[1]]
        for k in range(series.shape[1]):
            ess_vals.append(ess(series[:, k]))
            a = autocorr(series[:, k], 10) if n_draws >= 12 else float("nan")
            ac_vals.append(abs(a))
    ess_vals = np.array(ess_vals)
    ac_vals = np.array(ac_vals)
    finite_ac = ac_vals[np.isfinite(ac_vals)]
    return {
        "elements": ess_vals.size,
        "ess.mean": float(np.mean(ess_vals)),
        "ess.min": float(np.min(ess_vals)),
        "ess.max": float(np.max(ess_vals)),
        "abs_autocorr_lag10.max": float(np.max(finite_ac)) if finite_ac.size else float("nan"),
        "abs_autocorr_lag10.mean": float(np.mean(finite_ac)) if finite_ac.size else float("nan"),
    }


def _write_kv(path: Path, entries: dict) -> None:
    lines = []
    for k, v in entries.items():
        if isinstance(v, float):
            v = FMT % v
        lines.append(f"{k} = {v}")
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# fit


def cmd_fit(args: argparse.Namespace) -> int:
    t0 = time.time()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed

    data = load_dataset(args.dataset)
    record = None
    if args.standardize:
        data, record = center_and_standardize(data)

    chain = run_chain(data, cfg)

    draws_path = out / "draws.bin"
    write_draws(draws_path, chain.sigma_draws)

    result = bayes_stein_estimate(chain)
    est_files = {}
    for g, est in zip(data.groups, result.estimates):
        M = est.entries
        if record is not None:
            M = rescale_covariance(M, record, g.label)
        path = out / f"estimate_{g.label}.csv"
        _write_estimate(path, g.label, data.shape, M)
        est_files[f"estimate_{g.label}"] = path

    _write_kv(out / "acceptance.txt", {k: v for k, v in chain.acceptance_rates.items()})
    diag = _chain_diagnostics(chain.sigma_draws)
    _write_kv(out / "diagnostics.txt", diag)

    entries = {
        "command": "fit",
        "version": __version__,
        "seed": cfg.seed,
        "standardized": args.standardize,
        "iterations": chain.iterations,
        "burn_in": chain.burn_in,
        "thin": chain.thin,
        "n_draws": chain.n_draws,
        "elapsed_seconds": round(time.time() - t0, 3),
        **_config_echo(cfg),
    }
    files = {"draws": draws_path, **est_files}
    files["dataset"] = Path(args.dataset)
    write_run_manifest(out / "manifest.txt", entries, files)
    print(f"fit: {chain.n_draws} retained draws -> {out}")
    return 0


# ---------------------------------------------------------------------------
# simulate

_REGIMES = {
    "ho-k": ("Ho", "K"),
    "he-k": ("He", "K"),
    "ho-n": ("Ho", "N"),
    "he-n": ("He", "N"),
}

ESTIMATOR_ORDER = ["swag", "sample", "pooled", "kron", "kron_pooled"]


def simulation_losses(
    regime: Regime,
    n_per_group: int,
    reps: int,
    cfg: SwagConfig,
) -> tuple[dict[str, np.ndarray], list[SpdMatrix]]:
    """Average Stein loss per estimator and rep; deterministic given seeds."""
    truths, _ = generate_regime(regime)
    shape = regime.shape
    losses = {name: np.empty(reps) for name in ESTIMATOR_ORDER}
    for rep in range(reps):
        data = simulate_dataset(truths, n_per_group, shape, seed=regime.seed + 1000 * (rep + 1))
        rep_cfg = SwagConfig(**{f.name: getattr(cfg, f.name) for f in fields(cfg)})
        rep_cfg.seed = regime.seed + 1000 * (rep + 1) + 1
        chain = run_chain(data, rep_cfg)
        swag_est = bayes_stein_estimate(chain).estimates
        sample_est = [SpdMatrix(sample_cov(Y)) for Y in data.matrices()]
        pooled = SpdMatrix(pooled_sample_cov(data))
        kron_est = [
            kron_mle_flipflop(Y, shape).product() for Y in data.matrices()
        ]
        kron_pooled = pooled_kron_mle(data).product()
        J = regime.J
        losses["swag"][rep] = avg_stein_loss(truths, swag_est)
        losses["sample"][rep] = avg_stein_loss(truths, sample_est)
        losses["pooled"][rep] = avg_stein_loss(truths, [pooled] * J)
        losses["kron"][rep] = avg_stein_loss(truths, kron_est)
        losses["kron_pooled"][rep] = avg_stein_loss(truths, [kron_pooled] * J)
    return losses, truths


def cmd_simulate(args: argparse.Namespace) -> int:
    t0 = time.time()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.iterations is not None:
        cfg.iterations = args.iterations
    if args.burn_in is not None:
        cfg.burn_in = args.burn_in
    if args.thin is not None:
        cfg.thin = args.thin

    homo, struct = _REGIMES[args.regime]
    shape = MatrixShape(args.p1, args.p2)
    regime = Regime(homo, struct, args.J, shape, seed=cfg.seed)

    losses, truths = simulation_losses(regime, args.n, args.reps, cfg)

    for j, truth in enumerate(truths):
        _write_estimate(out / f"truth_g{j}.csv", f"g{j}", shape, truth.entries)
    # one representative dataset for inspection (first replicate's seed)
    data = simulate_dataset(truths, args.n, shape, seed=regime.seed + 1000)
    save_dataset(data, out / "data", name="rep0")

    lines = ["estimator,mean_avg_stein_loss," + ",".join(
        f"rep{r}" for r in range(args.reps)
    )]
    for name in ESTIMATOR_ORDER:
        vals = losses[name]
        lines.append(
            name + "," + (FMT % float(np.mean(vals))) + ","
            + ",".join(FMT % v for v in vals)
        )
    table = out / "losses.csv"
    table.write_text("\n".join(lines) + "\n")

    entries = {
        "command": "simulate",
        "version": __version__,
        "regime": args.regime,
        "J": args.J,
        "p1": args.p1,
        "p2": args.p2,
        "n": args.n,
        "reps": args.reps,
        "seed": cfg.seed,
        "elapsed_seconds": round(time.time() - t0, 3),
        **_config_echo(cfg),
    }
    write_run_manifest(out / "manifest.txt", entries, {"losses": table})
    print(f"simulate: {args.reps} reps of {args.regime} -> {table}")
    return 0


# ---------------------------------------------------------------------------
# classify


def estimate_covariances(
    train: GroupedDataset, method: str, cfg: SwagConfig
) -> list[SpdMatrix]:
    """Per-class covariance estimates on (already centered) training data."""
    if method == "swag":
        chain = run_chain(train, cfg)
        return bayes_stein_estimate(chain).estimates
    if method == "mle":
        return [SpdMatrix(sample_cov(Y)) for Y in train.matrices()]
    if method == "pooled":
        pooled = SpdMatrix(pooled_sample_cov(train))
        return [pooled] * train.n_groups
    if method == "kron":
        return [kron_mle_flipflop(Y, train.shape).product() for Y in train.matrices()]
    if method == "blend":
        return partial_pool_blend(train).estimates
    raise ValueError(f"unknown covariance method '{method}'")


def cmd_classify(args: argparse.Namespace) -> int:
    t0 = time.time()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed

    train = load_dataset(args.train)
    test = load_dataset(args.test)
    if train.n_groups < 2:
        raise SystemExit("classify: need at least two classes in the training data")
    if train.labels() != test.labels():
        unseen = set(test.labels()) - set(train.labels())
        raise SystemExit(
            f"classify: test classes do not match training classes (unseen: {sorted(unseen)})"
        )
    if train.shape != test.shape:
        raise SystemExit("classify: train/test shapes differ")

    mus = [g.Y.mean(axis=0) for g in train.groups]
    centered = GroupedDataset(
        [Group(g.label, g.Y - mu) for g, mu in zip(train.groups, mus)],
        train.shape,
    )
    record = None
    if args.standardize:
        centered, record = center_and_standardize(centered)

    outputs = {}
    for method in args.method:
        ests = estimate_covariances(centered, method, cfg)
        if record is not None:
            ests = [
                SpdMatrix(rescale_covariance(e.entries, record, g.label))
                for e, g in zip(ests, centered.groups)
            ]
        cm = qda_classify(test, list(zip(mus, ests)))
        cpath = out / f"confusion_{method}.csv"
        header = "target\\pred," + ",".join(cm.labels)
        rows = [header]
        for lbl, row in zip(cm.labels, cm.counts):
            rows.append(lbl + "," + ",".join(str(int(c)) for c in row))
        cpath.write_text("\n".join(rows) + "\n")
        rpath = out / f"rates_{method}.csv"
        rates = cm.correct_rates()
        rlines = ["class,correct_rate"] + [
            f"{lbl},{FMT % r}" for lbl, r in zip(cm.labels, rates)
        ] + [f"average,{FMT % float(np.mean(rates))}"]
        rpath.write_text("\n".join(rlines) + "\n")
        outputs[f"confusion_{method}"] = cpath
        outputs[f"rates_{method}"] = rpath
        print(f"classify[{method}]: accuracy {cm.accuracy():.4f}")

    entries = {
        "command": "classify",
        "version": __version__,
        "methods": "+".join(args.method),
        "seed": cfg.seed,
        "standardized": args.standardize,
        "elapsed_seconds": round(time.time() - t0, 3),
        **_config_echo(cfg),
    }
    write_run_manifest(out / "manifest.txt", entries, outputs)
    return 0


# ---------------------------------------------------------------------------
# diagnose


def cmd_diagnose(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    draws = read_draws(args.draws)
    diag = _chain_diagnostics(draws)
    _write_kv(out / "diagnostics.txt", diag)
    for spec in args.trace or []:
        try:
            g, i, j = (int(s) for s in spec.split(","))
        except ValueError:
            raise SystemExit(f"diagnose: trace spec '{spec}' is not 'group,row,col'")
        if not (0 <= g < draws.shape[1] and 0 <= i < draws.shape[2] and 0 <= j < draws.shape[3]):
            raise SystemExit(f"diagnose: trace spec '{spec}' out of bounds")
        series = draws[:, g, i, j]
        np.savetxt(out / f"trace_{g}_{i}_{j}.csv", series, fmt=FMT)
    print(
        f"diagnose: {diag['elements']} elements, mean ESS {diag['ess.mean']:.2f}, "
        f"max |lag-10 autocorr| {diag['abs_autocorr_lag10.max']:.4f}"
    )
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swag",
        description="Hierarchical covariance estimation for multi-group matrix-variate data",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="flat key = value config file")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--out", default="swag_out", help="output directory")

    p_fit = sub.add_parser("fit", help="run the sampler on a dataset")
    p_fit.add_argument("--dataset", required=True, help="dataset manifest file")
    p_fit.add_argument(
        "--standardize",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="center and standardize each group before fitting (default on)",
    )
    common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="simulation study comparing estimators")
    p_sim.add_argument("--regime", required=True, choices=sorted(_REGIMES))
    p_sim.add_argument("--J", type=int, required=True)
    p_sim.add_argument("--p1", type=int, required=True)
    p_sim.add_argument("--p2", type=int, required=True)
    p_sim.add_argument("--n", type=int, required=True, help="per-group sample size")
    p_sim.add_argument("--reps", type=int, default=1)
    p_sim.add_argument("--iterations", type=int, default=None)
    p_sim.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p_sim.add_argument("--thin", type=int, default=None)
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_cls = sub.add_parser("classify", help="QDA classification with estimated covariances")
    p_cls.add_argument("--train", required=True, help="training dataset manifest")
    p_cls.add_argument("--test", required=True, help="test dataset manifest")
    p_cls.add_argument(
        "--method",
        action="append",
        choices=["swag", "mle", "pooled", "kron", "blend"],
        help="covariance method (repeatable); default mle",
    )
    p_cls.add_argument(
        "--standardize",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="standardize each class before covariance estimation (default on)",
    )
    common(p_cls)
    p_cls.set_defaults(func=cmd_classify)

    p_diag = sub.add_parser("diagnose", help="ESS / autocorrelation report for saved draws")
    p_diag.add_argument("--draws", required=True, help="draws container from 'swag fit'")
    p_diag.add_argument(
        "--trace",
        action="append",
        metavar="G,I,J",
        help="write the trace of element (row I, col J) of group G (repeatable)",
    )
    common(p_diag)
    p_diag.set_defaults(func=cmd_diagnose)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "classify" and not args.method:
        args.method = ["mle"]
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
