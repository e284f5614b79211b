"""Choice of the KL tolerance.

``D_KL(Sigma || S_hat)`` for a Gaussian sample covariance ``S_hat`` has a
distribution that depends only on ``(n, N)``: with ``Q_N`` the sample
covariance of ``N`` standard normal vectors,

    d = 0.5 * (log|Q_N| + tr(Q_N^-1) - n).

The tolerance ``delta_alpha`` is the ``alpha``-quantile of ``2d``, computed
either by sampling ``Q_N`` directly ("empirical") or by sampling the
Gaussian Orthogonal Ensemble limit of ``sqrt(N) (Q_N - I)`` ("goe").
Every draw has its own random stream spawned from ``(seed, draw index)``.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (AsymptoticRegimeError, InvalidAlpha, SingularDraw,
                     TrivialSolutionRisk)
from .linalg import SpdMatrix, kl_divergence

DEFAULT_DRAWS = 5000
DEFAULT_ALPHA = 0.5
DELTA_MARGIN = 1e-9


@dataclass(frozen=True)
class CalibrationResult:
    delta_alpha: float
    alpha: float
    method: str
    draws: int
    seed: int
    n: int
    N: int
    delta_max: float = math.nan
    clipped: bool = False

    @property
    def usable(self):
        return not self.clipped and (math.isnan(self.delta_max)
                                     or self.delta_alpha < self.delta_max - DELTA_MARGIN)

    def to_dict(self):
        return {
            "delta_alpha": self.delta_alpha,
            "alpha": self.alpha,
            "method": self.method,
            "draws": self.draws,
            "seed": self.seed,
            "n": self.n,
            "N": self.N,
            "delta_max": None if math.isnan(self.delta_max) else self.delta_max,
            "clipped": self.clipped,
        }


def delta_max(sigma_hat):
    """Smallest ``2 D_KL(Sigma_D || S_hat)`` over diagonal ``Sigma_D``.

    Equals ``log|dd(S_hat^-1) S_hat|``, attained at
    ``Sigma_D = diag(1 / (S_hat^-1)_ii)``.
    """
    S = SpdMatrix.certify(sigma_hat)
    gamma = np.diag(S.inv())
    return float(np.sum(np.log(gamma)) + S.logdet())


def diagonal_minimizer(sigma_hat):
    S = SpdMatrix.certify(sigma_hat)
    return np.diag(1.0 / np.diag(S.inv()))


def _check(n, N, alpha, draws):
    if not 0 < alpha < 1:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    if n < 1 or N <= n:
        raise ValueError(f"need N > n >= 1, got n={n}, N={N}")
    if draws < 1:
        raise ValueError("draws must be positive")


def _streams(seed, draws):
    return [np.random.default_rng(s)
            for s in np.random.SeedSequence(seed).spawn(draws)]


def _pivot_from_eigs(w):
    return 0.5 * float(np.sum(np.log(w) + 1.0 / w - 1.0))


def kl_pivot_sample(n, N, rng):
    """One draw of ``D_KL(Sigma || S_hat)`` through its pivotal form."""
    for _ in range(2):
        Z = rng.standard_normal((N, n))
        w = np.linalg.eigvalsh(Z.T @ Z / N)
        if w[0] > 1e-12 * w[-1]:
            return max(_pivot_from_eigs(w), 0.0)
    raise SingularDraw(f"Q_N numerically singular twice (n={n}, N={N})")


def kl_sample_from_covariance(sigma, N, rng):
    """One draw of ``D_KL(Sigma || S_hat)`` computed the long way.

    Samples ``N`` vectors from ``N(0, sigma)``, forms the sample covariance
    and evaluates the divergence directly; used to check pivotality.
    """
    S = SpdMatrix.certify(sigma)
    Z = rng.standard_normal((N, S.n)) @ np.linalg.cholesky(S.value).T
    return kl_divergence(S, Z.T @ Z / N)


def sample_goe(n, rng):
    """Symmetric matrix with N(0, 1) off-diagonal and N(0, 2) diagonal entries."""
    G = rng.standard_normal((n, n))
    X = np.triu(G, 1)
    X = X + X.T
    X[np.diag_indices(n)] = np.sqrt(2.0) * np.diag(G)
    return X


def goe_divergence(eigs, N):
    """``sum_i 0.5 * (log(l_i/sqrt(N) + 1) - l_i/(l_i + sqrt(N)))``."""
    eigs = np.asarray(eigs, dtype=float)
    rN = math.sqrt(N)
    return 0.5 * float(np.sum(np.log1p(eigs / rN) - eigs / (eigs + rN)))


def nearest_rank_quantile(values, alpha):
    v = np.sort(np.asarray(values, dtype=float))
    k = max(math.ceil(alpha * v.size), 1)
    return float(v[k - 1])


def pivot_samples(n, N, draws, seed):
    """``draws`` values of ``2 d`` from the empirical route."""
    return np.array([2.0 * kl_pivot_sample(n, N, g) for g in _streams(seed, draws)])


def goe_samples(n, N, draws, seed):
    """``draws`` values of ``2 d`` from the GOE route.

    Draws whose eigenvalues violate ``l/sqrt(N) + 1 > 0`` are resampled
    from the same stream; more than 1% violations is an error.
    """
    rN = math.sqrt(N)
    out = np.empty(draws)
    violations = 0
    limit = 0.01 * draws
    for i, g in enumerate(_streams(seed, draws)):
        while True:
            w = np.linalg.eigvalsh(sample_goe(n, g))
            if w[0] / rN + 1.0 > 0:
                break
            violations += 1
            if violations > limit:
                raise AsymptoticRegimeError(
                    f"more than 1% of GOE draws violate l/sqrt(N) + 1 > 0 "
                    f"(n={n}, N={N}); N is too small for the asymptotic approximation")
        out[i] = 2.0 * goe_divergence(w, N)
    return out


def delta_alpha_empirical(n, N, alpha=DEFAULT_ALPHA, draws=DEFAULT_DRAWS, seed=0):
    _check(n, N, alpha, draws)
    s = pivot_samples(n, N, draws, seed)
    return CalibrationResult(nearest_rank_quantile(s, alpha), alpha, "empirical",
                             draws, int(seed), n, N)


def delta_alpha_goe(n, N, alpha=DEFAULT_ALPHA, draws=DEFAULT_DRAWS, seed=0):
    _check(n, N, alpha, draws)
    s = goe_samples(n, N, draws, seed)
    return CalibrationResult(nearest_rank_quantile(s, alpha), alpha, "goe",
                             draws, int(seed), n, N)


def calibrate(n, N, alpha=DEFAULT_ALPHA, method="empirical", draws=DEFAULT_DRAWS, seed=0):
    if method == "empirical":
        return delta_alpha_empirical(n, N, alpha, draws, seed)
    if method == "goe":
        return delta_alpha_goe(n, N, alpha, draws, seed)
    raise ValueError(f"unknown calibration method {method!r}")


def against_covariance(result, sigma_hat, strict=True):
    """Attach ``delta_max(sigma_hat)`` to a calibration result.

    With ``strict`` a clipped result raises :class:`TrivialSolutionRisk`.
    """
    dmax = delta_max(sigma_hat)
    clipped = result.delta_alpha >= dmax - DELTA_MARGIN
    out = replace(result, delta_max=dmax, clipped=clipped)
    if clipped and strict:
        raise TrivialSolutionRisk(result.delta_alpha, dmax)
    return out
