import numpy as np
import pytest

from robust_factor_rank.calibration import calibrate, delta_max
from robust_factor_rank.dual import DualSolution, admm_solve
from robust_factor_rank.errors import (InfeasibleDual, NegativeQ,
                                       RecoveryInconsistent, ZeroRank)
from robust_factor_rank.experiments import generate_factor_model, sample_data
from robust_factor_rank.ingestion import sample_covariance
from robust_factor_rank.linalg import kl_divergence
from robust_factor_rank.recovery import (kernel_basis, recover_decomposition,
                                         recover_sigma, solve_Q)

from conftest import random_spd


def fake_solution(X, lam=1.0):
    n = X.shape[0]
    return DualSolution(lam, X, np.eye(n) - X, np.zeros((n, n)), -1.0, 1, True,
                        0.0, 0.0, 0.1)


def cvx_primal(S, delta):
    cp = pytest.importorskip("cvxpy")
    n = S.shape[0]
    Si = np.linalg.inv(S)
    ld = np.linalg.slogdet(S)[1]
    Sig = cp.Variable((n, n), symmetric=True)
    L = cp.Variable((n, n), symmetric=True)
    d = cp.Variable(n)
    cons = [L >> 0, d >= 0, Sig == L + cp.diag(d),
            -cp.log_det(Sig) + ld + cp.trace(Si @ Sig) - n <= delta]
    prob = cp.Problem(cp.Minimize(cp.trace(L)), cons)
    prob.solve(solver="CLARABEL")
    return prob.value, L.value


def test_recover_sigma_zero_multiplier(rng):
    S = random_spd(rng, 4)
    np.testing.assert_allclose(recover_sigma(fake_solution(np.zeros((4, 4))), S), S,
                               rtol=1e-12, atol=1e-12)


def test_recover_sigma_infeasible(toy2):
    with pytest.raises(InfeasibleDual):
        recover_sigma(fake_solution(np.zeros((2, 2)), lam=0.0), toy2)
    with pytest.raises(InfeasibleDual):
        recover_sigma(fake_solution(-10 * np.eye(2)), toy2)


def test_kernel_basis_examples():
    U, r = kernel_basis(np.diag([1.0, 1.0, 0.0]))
    assert r == 1
    np.testing.assert_allclose(np.abs(U[:, 0]), [0, 0, 1], atol=1e-15)
    with pytest.raises(ZeroRank):
        kernel_basis(np.diag([1.0, 2.0, 0.5]))


def test_kernel_basis_orthonormal(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    Lam = (Q * np.array([0, 0, 1e-9, 1, 2, 3])) @ Q.T
    U, r = kernel_basis(Lam)
    assert r == 3
    np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-12)
    assert np.linalg.norm(Lam @ U) <= 1e-6 * 3 * np.sqrt(3)


def test_solve_Q_forward_construction(rng):
    n, r = 8, 2
    U, _ = np.linalg.qr(rng.standard_normal((n, r)))
    B = rng.standard_normal((r, r))
    Q_true = B @ B.T + 0.1 * np.eye(r)
    L = U @ Q_true @ U.T
    d = rng.uniform(0.5, 1.5, n)
    d[[1, 4]] = 0.0  # active diagonal multipliers where the noise variance is zero
    Gamma = np.diag(np.where(d == 0, 1.0, 0.0))
    Q, info = solve_Q(U, L + np.diag(d), Gamma)
    np.testing.assert_allclose(Q, Q_true, atol=1e-10)
    assert info["residual"] < 1e-10
    assert not info["underdetermined"]


def test_solve_Q_full_rank_underdetermined(rng):
    n = 4
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    sigma = random_spd(rng, n)
    Q, info = solve_Q(U, sigma, np.zeros((n, n)))
    assert info["underdetermined"]
    L = U @ Q @ U.T
    off = ~np.eye(n, dtype=bool)
    np.testing.assert_allclose(L[off], sigma[off], atol=1e-12)
    D = np.diag(np.diag(sigma - L))
    np.testing.assert_allclose(Q, U.T @ (sigma - D) @ U, atol=1e-12)


def test_solve_Q_inconsistent(rng):
    n = 6
    U = np.eye(n)[:, :1]
    sigma = random_spd(rng, n)
    with pytest.raises(RecoveryInconsistent):
        solve_Q(U, sigma, np.zeros((n, n)))


def test_solve_Q_negative():
    n = 5
    u = np.ones((n, 1)) / np.sqrt(n)
    sigma = -(u @ u.T) + 2 * np.eye(n)
    with pytest.raises(NegativeQ):
        solve_Q(u, sigma, np.zeros((n, n)))


def check_decomposition(dec, S, delta):
    n = S.shape[0]
    tr = dec.trace_L
    sig_norm = np.linalg.norm(dec.sigma_star)
    assert tr >= 0
    assert abs(dec.duality_gap) <= 1e-3 * (1 + tr)
    assert max(dec.kkt_residuals) <= 1e-4 * (1 + sig_norm)
    assert 2 * kl_divergence(dec.sigma_star, S) == pytest.approx(delta, rel=1e-4)
    np.testing.assert_allclose(dec.sigma_star, dec.L_star + dec.D_star,
                               atol=1e-6 * sig_norm)
    off = ~np.eye(n, dtype=bool)
    assert np.all(dec.D_star[off] == 0)
    assert np.all(np.diag(dec.D_star) >= 0)
    assert np.linalg.eigvalsh(dec.L_star)[0] >= -1e-8 * np.linalg.norm(dec.L_star, 2)


def test_toy_instance_against_convex_solver(toy2):
    delta = 0.1
    value, L_ref = cvx_primal(toy2, delta)
    dec = recover_decomposition(admm_solve(toy2, delta), toy2, delta)
    check_decomposition(dec, toy2, delta)
    assert dec.trace_L == pytest.approx(value, abs=1e-3)
    assert np.linalg.norm(dec.L_star - L_ref) <= 1e-3


def test_random_instances_against_convex_solver():
    rng = np.random.default_rng(3)
    for _ in range(3):
        n = 8
        A = rng.standard_normal((n, 2))
        sig = A @ A.T + np.diag(rng.uniform(0.5, 1.5, n))
        Y = rng.standard_normal((200, n)) @ np.linalg.cholesky(sig).T
        S = Y.T @ Y / 200
        delta = 0.5 * delta_max(S)
        value, _ = cvx_primal(S, delta)
        dec = recover_decomposition(admm_solve(S, delta), S, delta)
        check_decomposition(dec, S, delta)
        assert dec.trace_L == pytest.approx(value, rel=1e-4)


def test_factor_model_instance_rank():
    model = generate_factor_model(40, 4, seed=0)
    S = sample_covariance(sample_data(model, 1000, seed=1))
    delta = calibrate(40, 1000, 0.5, draws=2000, seed=0).delta_alpha
    dec = recover_decomposition(admm_solve(S, delta), S, delta)
    check_decomposition(dec, S, delta)
    assert dec.rank_estimate == 4
    # the exact optimum is not rank 4: its kernel matches the algebraic rank of L*
    w = np.linalg.eigvalsh(dec.L_star)
    assert dec.kernel_dim == int(np.sum(w > 1e-8 * w[-1]))
    assert dec.kernel_dim >= dec.rank_estimate


def test_to_dict_fields(toy2):
    dec = recover_decomposition(admm_solve(toy2, 0.1), toy2)
    d = dec.to_dict()
    assert d["n"] == 2 and d["rank"] == dec.rank_estimate
    assert set(d["kkt_residuals"]) == {"trace_Lambda_L", "trace_Gamma_D", "trace_Theta_D"}
    assert len(d["eigenvalues_L"]) == 2 and len(d["diag_D"]) == 2
