"""Primal recovery from a dual solution.

Given the dual optimum ``(lam, X)`` the optimal covariance is
``Sigma = (S^-1 + X/lam)^-1``. The low-rank part lives in the kernel of
``Lambda = I - X``: writing ``L = U Q U^T`` with ``U`` an orthonormal
basis of that kernel, complementary slackness reduces ``Q`` to a small
linear system (off-diagonal entries of ``L`` match those of ``Sigma``;
diagonal entries match wherever the diagonal multiplier is active).
"""

from dataclasses import dataclass, field

import numpy as np

from .dual import DualSolution
from .errors import (InfeasibleDual, NegativeQ, RecoveryInconsistent,
                     ZeroRank)
from .linalg import SpdMatrix, dd, from_eig, kl_divergence, ofd, sym, sym_eig
from .rank import numerical_rank

TOL_RANK = 1e-6
TOL_ACTIVE = 1e-6
D_CLIP = 1e-8


@dataclass
class Decomposition:
    sigma_star: np.ndarray
    L_star: np.ndarray
    D_star: np.ndarray
    rank_estimate: int
    kernel_dim: int
    duality_gap: float
    kkt_residuals: tuple
    kl_to_sigma_hat: float
    delta: float
    lambda_star: float
    dual_objective: float
    q_residual: float
    q_condition: float
    underdetermined: bool
    converged: bool
    iterations: int
    spectrum: object = field(default=None, repr=False)

    @property
    def n(self):
        return self.sigma_star.shape[0]

    @property
    def trace_L(self):
        return float(np.trace(self.L_star))

    def to_dict(self):
        wL = np.linalg.eigvalsh(self.L_star)[::-1]
        r1, r2, r3 = self.kkt_residuals
        out = {
            "n": self.n,
            "delta": self.delta,
            "lambda_star": self.lambda_star,
            "rank": self.rank_estimate,
            "kernel_dim": self.kernel_dim,
            "trace_L": self.trace_L,
            "dual_objective": self.dual_objective,
            "duality_gap": self.duality_gap,
            "kkt_residuals": {"trace_Lambda_L": r1, "trace_Gamma_D": r2,
                              "trace_Theta_D": r3},
            "kl_to_sigma_hat": self.kl_to_sigma_hat,
            "q_residual": self.q_residual,
            "q_condition": self.q_condition,
            "underdetermined": self.underdetermined,
            "converged": self.converged,
            "iterations": self.iterations,
            "eigenvalues_L": [float(v) for v in wL],
            "diag_D": [float(v) for v in np.diag(self.D_star)],
        }
        if self.spectrum is not None:
            out["spectrum"] = self.spectrum.to_dict()
        return out


def recover_sigma(sol, sigma_hat):
    """``Sigma* = (S^-1 + X*/lam*)^-1``."""
    S = SpdMatrix.certify(sigma_hat)
    if not sol.lambda_star > 0:
        raise InfeasibleDual(f"lambda* = {sol.lambda_star} is not positive")
    P = S.inv() + sym(sol.X_star) / sol.lambda_star
    w, V = sym_eig(P)
    if w[0] <= 0:
        raise InfeasibleDual("S^-1 + X*/lambda* is not positive definite")
    return from_eig(1.0 / w, V)


def lagrange_multiplier(sol):
    """``Lambda* = I - X*``, read off the PSD slack ``Y*`` of the ADMM split.

    At convergence ``Y* = I - X*`` up to the primal residual; ``Y*`` is an
    exact eigenvalue-clipped projection, so its kernel is sharply defined.
    """
    return sym(sol.Y_star)


def kernel_basis(Lam, tol_rank=TOL_RANK):
    """Orthonormal basis of the (numerical) kernel of ``Lam``.

    Returns ``(U, r)`` where ``r`` counts the eigenvalues below
    ``tol_rank * max eigenvalue``.
    """
    if isinstance(Lam, DualSolution):
        Lam = lagrange_multiplier(Lam)
    w, V = sym_eig(Lam)
    scale = max(w[-1], 0.0)
    mask = w < tol_rank * scale
    r = int(mask.sum())
    if r == 0:
        raise ZeroRank("Lambda* has no kernel: the low-rank part is zero "
                       "(delta too close to delta_max, or diagonal covariance)")
    return V[:, mask], r


def _sym_basis(r):
    return [(a, b) for a in range(r) for b in range(a, r)]


def solve_Q(U, sigma_star, Gamma_star, tol_active=TOL_ACTIVE):
    """Least-squares solution of the linear system for ``Q`` (``L = U Q U^T``).

    Returns ``(Q, info)`` with ``info`` holding the residual norm, the
    condition number of the system and whether it was underdetermined.
    An underdetermined system yields the minimum-norm solution, unchecked
    for definiteness.
    """
    n, r = U.shape
    sigma_star = np.asarray(sigma_star, dtype=float)
    idx = _sym_basis(r)
    # column for parameter (a, b): U[:, a] U[:, b]^T + U[:, b] U[:, a]^T (once if a == b)
    cols = []
    for a, b in idx:
        B = np.outer(U[:, a], U[:, b])
        if a != b:
            B = B + B.T
        cols.append(B)
    B = np.stack(cols, axis=-1)  # n x n x p
    iu = np.triu_indices(n, k=1)
    rows = [B[iu]]
    rhs = [sigma_star[iu]]
    g = np.diag(Gamma_star)
    gmax = g.max() if g.size else 0.0
    if gmax > 0:
        active = np.flatnonzero(g > tol_active * gmax)
        if active.size:
            rows.append(B[active, active])
            rhs.append(sigma_star[active, active])
    Amat = np.vstack(rows)
    bvec = np.concatenate(rhs)
    coef, _, rank_A, sv = np.linalg.lstsq(Amat, bvec, rcond=None)
    resid = float(np.linalg.norm(Amat @ coef - bvec))
    underdetermined = rank_A < len(idx)
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else np.inf
    Q = np.zeros((r, r))
    for (a, b), v in zip(idx, coef):
        Q[a, b] = Q[b, a] = v
    scale = np.linalg.norm(sigma_star)
    if resid > 1e-3 * scale:
        raise RecoveryInconsistent(
            f"Q-system residual {resid:.3e} exceeds 1e-3 x |Sigma*|_F = {1e-3 * scale:.3e}")
    info = {"residual": resid, "condition": cond, "underdetermined": bool(underdetermined)}
    if underdetermined:
        # minimum-norm member of a solution family; definiteness is not determined
        return Q, info
    wq, Vq = sym_eig(Q)
    qnorm = max(abs(wq[0]), abs(wq[-1]))
    if wq[0] < -1e-6 * qnorm:
        raise NegativeQ(f"Q has eigenvalue {wq[0]:.3e} (|Q|_2 = {qnorm:.3e})")
    if wq[0] < 0:
        Q = from_eig(np.maximum(wq, 0.0), Vq)
    return Q, info


def recover_decomposition(sol, sigma_hat, delta=None, tol_rank=TOL_RANK,
                          tol_active=TOL_ACTIVE, cutoff=0.05):
    """Assemble ``(Sigma*, L*, D*)`` with duality-gap and KKT diagnostics."""
    S = SpdMatrix.certify(sigma_hat)
    delta = sol.delta if delta is None else float(delta)
    sigma_star = recover_sigma(sol, S)
    Lam = lagrange_multiplier(sol)
    U, r = kernel_basis(Lam, tol_rank)
    Gamma = sol.Gamma_star
    Theta = sol.Theta_star
    Q, info = solve_Q(U, sigma_star, Gamma, tol_active)
    L = sym(U @ Q @ U.T)
    D = dd(sigma_star - L)
    dvals = np.diag(D).copy()
    lim = D_CLIP * np.linalg.eigvalsh(sigma_star)[-1]
    if dvals.min() < -lim:
        raise RecoveryInconsistent(
            f"D* has a negative diagonal entry {dvals.min():.3e}")
    D = np.diag(np.maximum(dvals, 0.0))
    trL = float(np.trace(L))
    gap = trL + sol.objective
    resid = sigma_star - L
    # Lam (= Y*) annihilates L by construction; I - X* checks it against the dual iterate
    kkt = (abs(float(np.sum((np.eye(L.shape[0]) - sol.X_star) * L))),
           abs(float(np.sum(Gamma * resid))),
           abs(float(np.sum(Theta * resid))))
    kl = kl_divergence(sigma_star, S)
    spectrum = numerical_rank(np.linalg.eigvalsh(L)[::-1], cutoff=cutoff)
    return Decomposition(
        sigma_star=sigma_star, L_star=L, D_star=D,
        rank_estimate=spectrum.r_opt, kernel_dim=r,
        duality_gap=gap, kkt_residuals=kkt, kl_to_sigma_hat=kl,
        delta=delta, lambda_star=sol.lambda_star, dual_objective=sol.objective,
        q_residual=info["residual"], q_condition=info["condition"],
        underdetermined=info["underdetermined"], converged=sol.converged,
        iterations=sol.iterations, spectrum=spectrum)
