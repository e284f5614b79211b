"""ADMM solver for the dual of the KL-robust minimum trace problem.

The dual is

    minimize   F(lam, X) = -lam * (log|S^-1 + X/lam| + log|S| - delta)
    subject to lam > 0,  X <= I,  diag(X) <= 0,  S^-1 + X/lam > 0

where ``S`` is the sample covariance. The constraint ``X <= I`` is split
off through a slack ``Y = I - X`` kept positive semidefinite, and the
augmented Lagrangian

    L_rho = F(lam, X) + <M, Y - I + X> + rho/2 ||Y - I + X||_F^2

is minimised alternately in ``(lam, X)`` (by projected gradient steps
with Armijo backtracking) and in ``Y`` (closed form PSD projection),
followed by the usual multiplier update.
"""

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .calibration import DELTA_MARGIN, delta_max
from .errors import DomainError, StepFailure, TrivialSolutionRisk
from .linalg import SpdMatrix, dd, ofd, project_psd, sym

log = logging.getLogger(__name__)



@dataclass(frozen=True)
class SolverOptions:
    rho: float = 0.5
    # 1e-4 leaves KKT residuals near 1e-3 at n=40; recovery needs ~1e-8
    eps_rel: float = 1e-8
    eps_abs: float = 1e-8
    max_iter: int = 5000
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    lambda_init: float = 1.0
    inner_steps: int = 1
    # one-step ADMM can cycle on some instances; retry once with more inner steps
    fallback_inner_steps: int = 3
    normalize: bool = True

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not (self.eps_rel > 0 and self.eps_abs > 0):
            raise ValueError("tolerances must be positive")
        if (self.max_iter < 1 or self.inner_steps < 1 or self.max_backtracks < 0
                or self.fallback_inner_steps < 0):
            raise ValueError("iteration counts must be positive")
        if not (0 < self.armijo_c < 1 and 0 < self.backtrack < 1):
            raise ValueError("armijo_c and backtrack must lie in (0, 1)")
        if not self.lambda_init > 0:
            raise ValueError("lambda_init must be positive")

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class DualState:
    lam: float
    X: np.ndarray
    Y: np.ndarray
    M: np.ndarray
    iter: int = 0
    primal_residual: float = np.inf
    dual_residual: float = np.inf


@dataclass
class DualSolution:
    lambda_star: float
    X_star: np.ndarray
    Y_star: np.ndarray
    M_star: np.ndarray
    objective: float
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float
    delta: float
    history: list = field(default_factory=list, repr=False)

    @property
    def Theta_star(self):
        return ofd(self.X_star)

    @property
    def Gamma_star(self):
        return -dd(self.X_star)


class _Problem:
    """Cached quantities of one dual instance (sample covariance and delta)."""

    def __init__(self, sigma_hat, delta):
        S = SpdMatrix.certify(sigma_hat)
        self.S = S
        self.n = S.n
        self.S_inv = S.inv()
        self.logdet_S = S.logdet()
        self.delta = float(delta)

    def factor(self, lam, X):
        """Cholesky factor of ``S^-1 + X/lam``; DomainError outside the domain."""
        if not lam > 0 or not np.isfinite(lam):
            raise DomainError(f"lambda must be positive, got {lam}")
        P = self.S_inv + X / lam
        try:
            c = cho_factor(P, lower=True, check_finite=True)
        except (LinAlgError, ValueError):
            raise DomainError("S^-1 + X/lambda is not positive definite") from None
        return c

    @staticmethod
    def _logdet(c):
        return 2.0 * float(np.sum(np.log(np.diag(c[0]))))

    def objective(self, lam, X, c=None):
        c = self.factor(lam, X) if c is None else c
        return -lam * (self._logdet(c) + self.logdet_S - self.delta)

    def gradient(self, lam, X, c=None):
        """Gradient of F alone: ``(dF/dlam, dF/dX)``."""
        c = self.factor(lam, X) if c is None else c
        Sig = sym(cho_solve(c, np.eye(self.n)))
        g_lam = (-self._logdet(c) - self.logdet_S + self.delta
                 + float(np.sum(Sig * X)) / lam)
        return g_lam, -Sig


def dual_objective(lam, X, sigma_hat, delta):
    """Dual objective ``F(lam, X)``; raises DomainError outside its domain."""
    return _Problem(sigma_hat, delta).objective(lam, sym(X))


def dual_gradient(lam, X, Y, M, sigma_hat, delta, rho):
    """Gradient of the augmented Lagrangian in ``(lam, X)``.

    Returns ``(g_lam, G_X)`` where ``G_X = -(S^-1 + X/lam)^-1 + M + rho (Y - I + X)``.
    """
    p = _Problem(sigma_hat, delta)
    X = sym(X)
    g_lam, G = p.gradient(lam, X)
    return g_lam, sym(G + M + rho * (Y - np.eye(p.n) + X))


def dual_hessian(lam, X, sigma_hat):
    """Hessian of ``F`` in ``(lam, vec(X))``, a ``(1 + n^2)`` square matrix.

    With ``K = P^-1 kron P^-1`` and ``P = S^-1 + X/lam``::

        [[ x'Kx / lam^3,  -x'K / lam^2],
         [-Kx / lam^2,     K / lam    ]]

    It is PSD with ``(lam, vec(X))`` in its kernel (``F`` is positively
    homogeneous of degree one).
    """
    p = _Problem(sigma_hat, 1.0)
    X = sym(X)
    c = p.factor(lam, X)
    Pinv = sym(cho_solve(c, np.eye(p.n)))
    K = np.kron(Pinv, Pinv)
    x = X.reshape(-1, order="F")
    Kx = K @ x
    n2 = p.n * p.n
    H = np.empty((n2 + 1, n2 + 1))
    H[0, 0] = x @ Kx / lam**3
    H[0, 1:] = H[1:, 0] = -Kx / lam**2
    H[1:, 1:] = K / lam
    return H


def project_cx(X):
    """Zero the positive diagonal entries of ``X`` (projection onto diag(X) <= 0)."""
    X = np.array(X, dtype=float)
    d = np.diag(X)
    np.fill_diagonal(X, np.minimum(d, 0.0))
    return X


def _augmented(p, lam, X, Y, M, rho, c=None):
    R = Y - np.eye(p.n) + X
    return p.objective(lam, X, c) + float(np.sum(M * R)) + 0.5 * rho * float(np.sum(R * R))


def _pg_step(p, lam, X, Y, M, opts, it):
    """One projected-gradient step on L_rho in (lam, X) with Armijo backtracking."""
    I = np.eye(p.n)
    c = p.factor(lam, X)
    f0 = _augmented(p, lam, X, Y, M, opts.rho, c)
    g_lam, G = p.gradient(lam, X, c)
    G = G + M + opts.rho * (Y - I + X)
    t = 1.0
    for _ in range(opts.max_backtracks + 1):
        lam_new = lam - t * g_lam
        X_new = project_cx(X - t * G)
        try:
            f1 = _augmented(p, lam_new, X_new, Y, M, opts.rho)
        except DomainError:
            t *= opts.backtrack
            continue
        decrease = g_lam * (lam_new - lam) + float(np.sum(G * (X_new - X)))
        if f1 <= f0 + opts.armijo_c * decrease:
            return lam_new, X_new, t, f1
        t *= opts.backtrack
    raise StepFailure(it)


def admm_solve(sigma_hat, delta, opts=None, trace_path=None, keep_history=False,
               callback=None):
    """Solve the dual problem by ADMM.

    Parameters
    ----------
    sigma_hat : array_like or SpdMatrix
        Sample covariance, positive definite.
    delta : float
        KL tolerance, ``0 < delta < delta_max(sigma_hat)``.
    opts : SolverOptions, optional
    trace_path : path-like, optional
        If given, one CSV row per iteration is written there
        (iter, F, ||R||_F, ||S||_F, lambda, step).
    keep_history : bool
        Keep the same per-iteration rows on the returned solution.
    callback : callable, optional
        Called with a :class:`DualState` (original units) after every
        iteration.

    Returns
    -------
    DualSolution
        ``converged`` is False when ``max_iter`` was reached (after the
        fallback run with ``opts.fallback_inner_steps`` inner steps, if any).

    Notes
    -----
    With ``opts.normalize`` the iterations run on ``S / c`` with ``c`` the
    mean variance. The dual maps exactly: ``(lam, X)`` solves the scaled
    instance iff ``(c lam, X)`` solves the original one, and ``F`` scales
    by ``c``. Everything returned is in the original units.
    """
    opts = opts or SolverOptions()
    S = SpdMatrix.certify(sigma_hat)
    if not delta > 0:
        raise ValueError("delta must be positive")
    dmax = delta_max(S)
    if delta >= dmax - DELTA_MARGIN:
        raise TrivialSolutionRisk(delta, dmax)

    c = float(np.trace(S.value)) / S.n if opts.normalize else 1.0
    p = _Problem(S.value / c, delta)
    sol, rows = _admm_loop(p, c, opts, callback, trace_path is not None or keep_history)
    if not sol.converged and opts.fallback_inner_steps > opts.inner_steps:
        log.info("ADMM did not converge with %d inner step(s); retrying with %d",
                 opts.inner_steps, opts.fallback_inner_steps)
        retry = opts.with_(inner_steps=opts.fallback_inner_steps)
        sol, rows = _admm_loop(p, c, retry, callback, trace_path is not None or keep_history)
    if trace_path is not None:
        write_trace(trace_path, rows)
    if not sol.converged:
        log.warning("ADMM stopped after %d iterations without converging "
                    "(|R|=%.3e, |S|=%.3e)", sol.iterations, sol.primal_residual,
                    sol.dual_residual)
    if keep_history:
        sol.history = rows
    return sol


def _admm_loop(p, c, opts, callback, record):
    n = p.n
    I = np.eye(n)
    sqrt_n = np.sqrt(n)
    lam = float(opts.lambda_init)
    X = np.zeros((n, n))
    Y = I.copy()
    M = np.zeros((n, n))

    rows = []
    converged = False
    r_norm = s_norm = np.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        for _ in range(opts.inner_steps):
            lam, X, t, _ = _pg_step(p, lam, X, Y, M, opts, it)
        Y_old = Y
        Y = project_psd(I - X - M / opts.rho)
        R = Y - I + X
        M = M + opts.rho * R
        r_norm = float(np.linalg.norm(R))
        s_norm = float(np.linalg.norm(opts.rho * (Y - Y_old)))
        if callback is not None:
            callback(DualState(c * lam, X, Y, c * M, it, r_norm, s_norm))
        if record:
            rows.append((it, c * p.objective(lam, X), r_norm, s_norm, c * lam, t))
        eps_pri = n * opts.eps_abs + opts.eps_rel * max(
            sqrt_n, np.linalg.norm(X), np.linalg.norm(Y))
        eps_dual = n * opts.eps_abs + opts.eps_rel * np.linalg.norm(M)
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break

    sol = DualSolution(
        lambda_star=c * lam, X_star=X, Y_star=Y, M_star=c * M,
        objective=c * p.objective(lam, X), iterations=it, converged=converged,
        primal_residual=r_norm, dual_residual=s_norm, delta=p.delta)
    return sol, rows


def write_trace(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "F", "primal_residual", "dual_residual", "lambda", "step"])
        w.writerows(rows)
