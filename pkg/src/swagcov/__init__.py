"""Shrinkage Within and Across Groups (SWAG) covariance estimation.

A library for simultaneous covariance estimation across multiple groups of
matrix-variate data.  Each group's covariance is modeled as a convex blend of
an across-group (partially pooled) component and a within-group component
shrunk towards a Kronecker-separable structure; posterior inference runs
through a Metropolis-within-Gibbs sampler.
"""

from swagcov.linalg import MatrixShape, SpdMatrix, kron, vec, unvec
from swagcov.randdist import RngStream
from swagcov.sampler import ChainOutput, SwagConfig, SwagState, run_chain
from swagcov.data import GroupedDataset

__all__ = [
    "MatrixShape",
    "SpdMatrix",
    "kron",
    "vec",
    "unvec",
    "RngStream",
    "ChainOutput",
    "SwagConfig",
    "SwagState",
    "run_chain",
    "GroupedDataset",
]

__version__ = "0.1.0"
