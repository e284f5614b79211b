"""
Why plain minimum trace factor analysis is not enough
=====================================================

With the true covariance, minimum trace factor analysis returns the
low-rank part exactly. With a sample covariance no exact low-rank plus
diagonal decomposition exists, and the minimum trace solution fills up:
dozens of eigenvalues become non-negligible. Whether the largest-gap rule
still reads off the right number depends on how strong the factors are.
"""

# %%
import numpy as np

from robust_factor_rank import generate_factor_model, mtfa_decompose, sample_covariance
from robust_factor_rank.experiments import sample_data

model = generate_factor_model(n=40, r=4, seed=3)

exact = mtfa_decompose(model.sigma_true)
print("true covariance:   rank", exact.rank,
      " |L - AA^T| / |AA^T| = %.1e" % (np.linalg.norm(exact.L - model.L) / np.linalg.norm(model.L)))

# %%
# Same model, sample covariances of growing size.
for N in (200, 1000, 5000):
    S = sample_covariance(sample_data(model, N, seed=N))
    res = mtfa_decompose(S)
    w = np.linalg.eigvalsh(res.L)[::-1]
    print(f"N={N:5d}: rank {res.rank}, eigenvalues above 1% of the largest: "
          f"{int(np.sum(w > 0.01 * w[0]))}")
