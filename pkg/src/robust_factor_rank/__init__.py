"""Estimating the number of factors with a KL-robust minimum trace factor analysis."""

from .calibration import DEFAULT_DRAWS, CalibrationResult, calibrate, delta_max
from .dual import DualSolution, SolverOptions, admm_solve, dual_objective
from .errors import FactorRankError
from .experiments import (StudyConfig, StudyReport, generate_factor_model,
                          ledermann_bound, run_study)
from .ingestion import DataMatrix, load_matrix_csv, sample_covariance, validate_spd
from .linalg import SpdMatrix, kl_divergence
from .mtfa import MtfaResult, mtfa_decompose
from .rank import SpectrumReport, numerical_rank, subspace_alignment
from .recovery import Decomposition, recover_decomposition

__version__ = "0.1.0"

__all__ = [
    "CalibrationResult", "calibrate", "delta_max",
    "DualSolution", "SolverOptions", "admm_solve", "dual_objective",
    "FactorRankError",
    "StudyConfig", "StudyReport", "generate_factor_model", "ledermann_bound", "run_study",
    "DataMatrix", "load_matrix_csv", "sample_covariance", "validate_spd",
    "SpdMatrix", "kl_divergence",
    "MtfaResult", "mtfa_decompose",
    "SpectrumReport", "numerical_rank", "subspace_alignment",
    "Decomposition", "recover_decomposition",
    "estimate_rank",
]


def estimate_rank(sigma_hat, N, alpha=0.5, delta=None, opts=None, seed=0,
                  draws=None, method="empirical"):
    """Calibrate (unless ``delta`` is given), solve, and recover.

    Returns the :class:`Decomposition`; its ``rank_estimate`` is the answer.
    """
    S = SpdMatrix.certify(sigma_hat)
    if delta is None:
        delta = calibrate(S.n, N, alpha, method, draws or DEFAULT_DRAWS, seed).delta_alpha
    sol = admm_solve(S, delta, opts)
    return recover_decomposition(sol, S, delta)
