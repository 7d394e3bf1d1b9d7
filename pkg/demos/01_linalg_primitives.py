"""Linear algebra primitives behind the covariance model.

Walks through the SPD matrix wrapper, the Kronecker conventions, and the
Cholesky column expansion that powers the Kronecker-factor updates.
"""

import numpy as np

from swagcov.linalg import (
    MatrixShape,
    SpdMatrix,
    chol_column_expansion,
    kron,
    logdet_spd,
    solve_spd,
    unvec,
    vec,
)

rng = np.random.default_rng(0)

# An observation is a p1 x p2 matrix; internally everything works on its
# column-stacked vectorization of length p = p1 * p2.
shape = MatrixShape(2, 3)
Y = rng.standard_normal((2, 3))
y = vec(Y)
print("observation:\n", Y)
print("vectorized:", y)
assert np.array_equal(unvec(y, 2, 3), Y)

# Separable covariance: column factor C (p2 x p2) on the left, row factor R
# (p1 x p1) on the right, so cov(vec(Y)) = kron(C, R).
R = np.array([[1.0, 0.4], [0.4, 1.5]])
C = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, -0.2], [0.0, -0.2, 0.8]])
K = SpdMatrix(kron(C, R))
print("\nseparable covariance, dim", K.dim)

# log|C kron R| = p1 log|C| + p2 log|R|
lhs = logdet_spd(K)
rhs = 2 * logdet_spd(SpdMatrix(C)) + 3 * logdet_spd(SpdMatrix(R))
print(f"logdet via Kronecker identity: {lhs:.6f} == {rhs:.6f}")

# Solves reuse the cached Cholesky factor, never an explicit inverse.
b = rng.standard_normal(6)
x = solve_spd(K, b)
print("solve residual:", np.linalg.norm(K.entries @ x - b))

# The Cholesky column expansion writes an SPD matrix S as a sum of rank-one
# terms vec(L_k) vec(L_k)^T with each L_k a p1 x p2 matrix.  It converts
# traces against a Kronecker matrix into small-dimension quadratic forms:
#   sum_k tr(L_k C L_k^T R) = tr(S (C kron R))
A = rng.standard_normal((6, 8))
S = SpdMatrix(A @ A.T / 8 + 0.5 * np.eye(6))
Ls = chol_column_expansion(S, shape)
lhs = sum(np.trace(L @ C @ L.T @ R) for L in Ls)
rhs = np.trace(S.entries @ kron(C, R))
print(f"quadratic trace identity: {lhs:.6f} == {rhs:.6f}")
