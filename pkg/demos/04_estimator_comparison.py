"""Estimator comparison across data-generating regimes.

Reproduces the qualitative pattern of the simulation study: pooling wins
when groups share a covariance, Kronecker estimation wins when the truth is
separable, and the hierarchical posterior adapts to both.
"""

import numpy as np

from swagcov.cli import ESTIMATOR_ORDER, simulation_losses
from swagcov.evaluation import Regime
from swagcov.linalg import MatrixShape
from swagcov.sampler import SwagConfig

shape = MatrixShape(2, 3)
cfg = SwagConfig(iterations=2000, burn_in=500, thin=5)
reps = 3

print(f"{'regime':8s}" + "".join(f"{name:>14s}" for name in ESTIMATOR_ORDER))
for homo, struct in (("Ho", "N"), ("He", "N"), ("Ho", "K"), ("He", "K")):
    regime = Regime(homo, struct, 4, shape, seed=11)
    losses, _ = simulation_losses(regime, 7, reps, cfg)
    means = [float(np.mean(losses[name])) for name in ESTIMATOR_ORDER]
    row = f"{homo},{struct:3s}" + "".join(f"{m:14.3f}" for m in means)
    best = ESTIMATOR_ORDER[int(np.argmin(means))]
    print(row + f"   best: {best}")

print("""
Reading the table: 'sample' is the per-group MLE, 'pooled' its pooled
variant, 'kron' the per-group separable MLE, 'kron_pooled' its pooled
variant, and 'swag' the posterior estimate.  Each baseline has a regime it
is built for and regimes where it breaks down; the posterior estimate stays
close to the best baseline in every regime without being told which one it
is in.  (The 'sample' column is constant across regimes because Stein's
loss is invariant: the loss of the MLE depends only on the Wishart noise,
not on the true covariance.)
""")
