"""
Projection onto unit-trace PSD matrices and eigenvector rounding
================================================================

Projecting a symmetric matrix onto the set of PSD matrices with unit trace
only moves its eigenvalues, which go onto the probability simplex. Sampling
eigenvector ``v_i`` with probability ``lambda_i`` turns the matrix back into
a unit vector whose outer product is right on average.
"""

import numpy as np

from memarb.spectral import (
    is_weight_matrix,
    project_simplex,
    project_spectrahedron,
    sample_from_eigen,
    sym_eigen,
)

rng = np.random.default_rng(0)

###############################################################################
# The simplex projection clips the eigenvalues with a common shift.

print(project_simplex([0.6, 0.5, 0.1]))

###############################################################################
# Project a random symmetric matrix and inspect the result.

A = rng.standard_normal((4, 4))
M = 0.2 * (A + A.T)
X, eig = project_spectrahedron(M, return_eigen=True)
print("input spectrum:", np.round(sym_eigen(M).values, 3))
print("output spectrum:", np.round(eig.values, 3))
print("valid weight matrix:", is_weight_matrix(X))

###############################################################################
# Round ``X`` to unit vectors. The average of ``x x^T`` recovers ``X``.

for N in (100, 10_000, 1_000_000):
    draws = sample_from_eigen(eig, rng, size=N)
    err = np.linalg.norm(draws.T @ draws / N - X)
    print(f"N={N:>9,d}  ||mean(x x^T) - X||_F = {err:.4f}")
