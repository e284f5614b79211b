"""
Choosing the radius of the KL ball
==================================

The sample covariance ``S`` of ``N`` Gaussian observations is uncertain.
We describe the uncertainty with a ball ``{Sigma : 2 KL(Sigma || S) <= delta}``
and choose ``delta`` so the ball contains the true covariance with
probability ``alpha``. The divergence is pivotal (its law depends only on
``n`` and ``N``), so ``delta`` can be simulated once with ``Sigma = I``.
"""

# %%
import numpy as np

from robust_factor_rank.calibration import (calibrate, delta_max, kl_sample_from_covariance,
                                            pivot_samples)

n, N = 10, 1000

# %%
# Pivotality, checked by hand: draws under a far-from-identity covariance
# have the same distribution as draws under the identity.
rng = np.random.default_rng(0)
Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
sigma = (Q * np.logspace(0, 2, n)) @ Q.T
under_identity = pivot_samples(n, N, 4000, seed=1)
under_sigma = np.array([2 * kl_sample_from_covariance(sigma, N, rng) for _ in range(4000)])
for q in (0.1, 0.5, 0.9):
    print(f"quantile {q}: identity {np.quantile(under_identity, q):.5f}  "
          f"sigma {np.quantile(under_sigma, q):.5f}")

# %%
# The tolerance itself, by direct simulation and by the GOE approximation
# (accurate when N is large compared with n).
emp = calibrate(n, N, alpha=0.5, method="empirical", draws=5000, seed=0)
goe = calibrate(n, N, alpha=0.5, method="goe", draws=5000, seed=0)
print(f"delta_0.5 empirical {emp.delta_alpha:.5f}, GOE {goe.delta_alpha:.5f}")

# %%
# More data, smaller ball.
for m in (200, 500, 1000, 5000):
    print(m, round(calibrate(n, m, 0.5, draws=2000).delta_alpha, 5))

# %%
# ``delta`` must stay below ``delta_max(S) = log|dd(S^-1) S|``: beyond it a
# diagonal covariance fits in the ball and the low-rank part collapses to zero.
A = rng.standard_normal((n, 2))
Y = rng.standard_normal((N, n)) @ np.linalg.cholesky(A @ A.T + np.eye(n)).T
S = Y.T @ Y / N
print(f"delta_max(S) = {delta_max(S):.4f}  vs  delta_0.5 = {emp.delta_alpha:.4f}")
