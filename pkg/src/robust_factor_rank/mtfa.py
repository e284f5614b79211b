"""Minimum trace factor analysis of an exactly known covariance.

Solves ``min tr(L)`` over ``L >= 0`` and diagonal ``D >= 0`` with
``Sigma = L + D`` by two-block ADMM on the split ``L = Z``: the ``L``
block is a PSD projection, the ``Z`` block is the exact projection onto
``{ofd(Z) = ofd(Sigma), 0 <= diag(Z) <= diag(Sigma)}``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .dual import SolverOptions
from .linalg import SpdMatrix, project_psd, sym
from .rank import numerical_rank

log = logging.getLogger(__name__)


@dataclass
class MtfaResult:
    L: np.ndarray
    D: np.ndarray
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float
    spectrum: object = field(default=None, repr=False)

    @property
    def trace_L(self):
        return float(np.trace(self.L))

    @property
    def rank(self):
        return 0 if self.spectrum is None else self.spectrum.r_opt

    def to_dict(self):
        return {
            "trace_L": self.trace_L,
            "rank": self.rank,
            "converged": self.converged,
            "iterations": self.iterations,
            "eigenvalues_L": [float(v) for v in np.linalg.eigvalsh(self.L)[::-1]],
            "diag_D": [float(v) for v in np.diag(self.D)],
            "spectrum": None if self.spectrum is None else self.spectrum.to_dict(),
        }


def _project_z(W, off, diag_hi):
    Z = off.copy()
    np.fill_diagonal(Z, np.clip(np.diag(W), 0.0, diag_hi))
    return Z


def mtfa_decompose(sigma, opts=None, rho=1.0, cutoff=0.05):
    """Exact low-rank plus diagonal decomposition with minimum trace.

    Parameters
    ----------
    sigma : array_like or SpdMatrix
        Covariance to decompose.
    opts : SolverOptions, optional
        Only ``eps_abs``, ``eps_rel``, ``max_iter`` and ``normalize`` are used.
    rho : float
        ADMM penalty (on the variance-normalised scale).

    Returns
    -------
    MtfaResult
        On non-convergence the last iterate is returned with
        ``converged=False``.
    """
    opts = opts or SolverOptions(max_iter=20000)
    S = SpdMatrix.certify(sigma).value
    n = S.shape[0]
    c = float(np.trace(S)) / n if opts.normalize else 1.0
    Sn = S / c
    off = Sn.copy()
    np.fill_diagonal(off, 0.0)
    diag_hi = np.diag(Sn)
    I = np.eye(n)
    sqrt_n = np.sqrt(n)

    Z = _project_z(Sn, off, diag_hi)
    U = np.zeros((n, n))
    L = Z
    converged = False
    r_norm = s_norm = np.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        L = project_psd(Z - U - I / rho)
        Z_old = Z
        Z = _project_z(L + U, off, diag_hi)
        R = L - Z
        U = U + R
        r_norm = float(np.linalg.norm(R))
        s_norm = float(rho * np.linalg.norm(Z - Z_old))
        eps_pri = n * opts.eps_abs + opts.eps_rel * max(
            sqrt_n, np.linalg.norm(L), np.linalg.norm(Z))
        eps_dual = n * opts.eps_abs + opts.eps_rel * rho * np.linalg.norm(U)
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break
    if not converged:
        log.warning("MTFA ADMM stopped after %d iterations (|R|=%.3e, |S|=%.3e)",
                    it, r_norm, s_norm)

    L = sym(c * L)
    D = np.diag(np.maximum(np.diag(S) - np.diag(L), 0.0))
    w = np.linalg.eigvalsh(L)[::-1]
    spectrum = numerical_rank(w, cutoff) if w[0] > 0 else None
    return MtfaResult(L, D, it, converged, r_norm, s_norm, spectrum)
