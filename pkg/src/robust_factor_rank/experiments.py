"""Synthetic factor models and Monte Carlo studies of rank recovery.

Each run draws a random factor model ``Sigma = A A^T + D`` (``r`` factors,
signal-to-noise ratio ``|A A^T|_F / |D|_F = 1``), samples ``N`` zero-mean
Gaussian observations, and estimates the number of factors with the
KL-robust method and, optionally, with plain minimum trace factor
analysis of the sample covariance.
"""

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .calibration import calibrate
from .dual import SolverOptions, admm_solve
from .errors import EmptyInput, FactorRankError, InvalidRank, StudyFailure
from .ingestion import DataMatrix, sample_covariance, validate_spd
from .mtfa import mtfa_decompose
from .rank import subspace_alignment
from .recovery import recover_decomposition

log = logging.getLogger(__name__)

METHODS = ("proposed", "mtfa")
SNR_NORMS = {"fro": "fro", "spectral": 2, "trace": "nuc"}
MAX_FAILURE_RATE = 0.2


def ledermann_bound(n):
    """``floor((2n + 1 - sqrt(8n + 1)) / 2)``."""
    if n < 1:
        raise ValueError("n must be positive")
    root = math.isqrt(8 * n + 1)
    if root * root == 8 * n + 1:
        return (2 * n + 1 - root) // 2
    return math.floor((2 * n + 1 - math.sqrt(8 * n + 1)) / 2)


@dataclass(frozen=True)
class FactorModel:
    n: int
    r: int
    A: np.ndarray
    D: np.ndarray
    sigma_true: np.ndarray
    seed: int

    @property
    def L(self):
        return self.A @ self.A.T


def generate_factor_model(n, r, seed, snr_norm="fro"):
    """Random model with Gaussian loadings and uniform noise variances.

    ``A`` has i.i.d. standard normal entries; the noise variances are
    drawn uniform on [0.5, 1.5] and then rescaled so that
    ``|A A^T| == |D|`` in the chosen norm (``"fro"``, ``"spectral"`` or
    ``"trace"``).
    """
    if not 1 <= r <= ledermann_bound(n):
        raise InvalidRank(f"r={r} outside [1, {ledermann_bound(n)}] for n={n}")
    if snr_norm not in SNR_NORMS:
        raise ValueError(f"snr_norm must be one of {sorted(SNR_NORMS)}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, r))
    d = rng.uniform(0.5, 1.5, size=n)
    L = A @ A.T
    ord_ = SNR_NORMS[snr_norm]
    d *= np.linalg.norm(L, ord_) / np.linalg.norm(np.diag(d), ord_)
    D = np.diag(d)
    sigma = L + D
    return FactorModel(n, r, A, D, 0.5 * (sigma + sigma.T), int(seed))


def sample_data(model, N, seed):
    """``N`` independent draws from ``N(0, sigma_true)``."""
    if N < 1:
        raise ValueError("N must be positive")
    rng = np.random.default_rng(seed)
    C = np.linalg.cholesky(model.sigma_true)
    return DataMatrix(rng.standard_normal((N, model.n)) @ C.T)


def rmse(estimates, r_true):
    """Root mean squared deviation of integer rank estimates from ``r_true``."""
    e = np.asarray(list(estimates), dtype=float)
    if e.size == 0:
        raise EmptyInput("no estimates")
    return float(np.sqrt(np.mean((e - r_true) ** 2)))


@dataclass
class StudyConfig:
    n: int = 40
    r: int = 4
    N: int = 1000
    runs: int = 20
    alpha: float = 0.5
    seed: int = 0
    methods: tuple = METHODS
    calibration: str = "empirical"
    draws: int = 5000
    snr_norm: str = "fro"
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        self.methods = tuple(self.methods)
        if isinstance(self.solver, dict):
            self.solver = SolverOptions(**self.solver)
        if self.runs < 1:
            raise ValueError("runs must be positive")
        if self.snr_norm not in SNR_NORMS:
            raise ValueError(f"snr_norm must be one of {sorted(SNR_NORMS)}")
        if self.N <= self.n:
            raise ValueError("N must exceed n")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        if not 1 <= self.r <= ledermann_bound(self.n):
            raise InvalidRank(f"r={self.r} exceeds the Ledermann bound for n={self.n}")

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


@dataclass
class StudyReport:
    config: StudyConfig
    calibration: dict
    records: list
    rmse: dict
    failures: dict
    alignment_median: float

    def to_dict(self, timing=False):
        """JSON-ready summary; wall times are left out unless ``timing``."""
        recs = self.records if timing else [
            {k: v for k, v in rec.items() if k != "wall_time"} for rec in self.records]
        return {
            "config": self.config.to_dict(),
            "calibration": self.calibration,
            "rmse": self.rmse,
            "failures": self.failures,
            "alignment_median": self.alignment_median,
            "records": recs,
        }

    def ranks(self, method):
        return [rec["rank"] for rec in self.records
                if rec["method"] == method and rec["rank"] is not None]

    def write_csv(self, path):
        cols = ["run", "method", "rank", "sq_error", "alignment", "wall_time", "error"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            w.writeheader()
            for rec in self.records:
                w.writerow(rec)


def _run_seeds(seed, runs):
    ss = np.random.SeedSequence(seed).spawn(runs)
    return [tuple(int(x) for x in s.generate_state(2)) for s in ss]


def run_once(cfg, run, delta, model_seed, data_seed, timer=time.perf_counter):
    """One Monte Carlo run; returns a list of per-method records."""
    model = generate_factor_model(cfg.n, cfg.r, model_seed, cfg.snr_norm)
    Y = sample_data(model, cfg.N, data_seed)
    S = validate_spd(sample_covariance(Y))
    out = []
    if "proposed" in cfg.methods:
        t0 = timer()
        rec = {"run": run, "method": "proposed"}
        try:
            sol = admm_solve(S, delta, cfg.solver)
            dec = recover_decomposition(sol, S, delta)
            rec.update(rank=dec.rank_estimate,
                       alignment=subspace_alignment(model.A, dec.L_star, dec.rank_estimate),
                       converged=dec.converged, duality_gap=dec.duality_gap)
        except FactorRankError as e:
            rec.update(rank=None, alignment=None, error=f"{type(e).__name__}: {e}")
        rec["wall_time"] = timer() - t0
        out.append(rec)
    if "mtfa" in cfg.methods:
        t0 = timer()
        rec = {"run": run, "method": "mtfa"}
        try:
            res = mtfa_decompose(S, cfg.solver.with_(max_iter=max(cfg.solver.max_iter, 20000)))
            rank = res.rank
            rec.update(rank=rank,
                       alignment=subspace_alignment(model.A, res.L, rank) if rank else None,
                       converged=res.converged)
        except FactorRankError as e:
            rec.update(rank=None, alignment=None, error=f"{type(e).__name__}: {e}")
        rec["wall_time"] = timer() - t0
        out.append(rec)
    for rec in out:
        rec["sq_error"] = None if rec["rank"] is None else float((rec["rank"] - cfg.r) ** 2)
    return out


def run_study(cfg, timer=time.perf_counter):
    """Run the Monte Carlo study described by ``cfg``.

    The tolerance is calibrated once: its distribution depends only on
    ``(n, N)``, so every run shares the same ``delta_alpha``. Per-run
    failures are recorded; more than 20% failures for a method raises
    :class:`StudyFailure`.
    """
    cal = calibrate(cfg.n, cfg.N, cfg.alpha, cfg.calibration, cfg.draws, cfg.seed)
    records = []
    for run, (ms, ds) in enumerate(_run_seeds(cfg.seed, cfg.runs)):
        records.extend(run_once(cfg, run, cal.delta_alpha, ms, ds, timer))
    errors, failures = {}, {}
    for m in cfg.methods:
        recs = [r for r in records if r["method"] == m]
        bad = sum(r["rank"] is None for r in recs)
        failures[m] = bad
        if bad > MAX_FAILURE_RATE * len(recs):
            raise StudyFailure(f"{m}: {bad}/{len(recs)} runs failed")
        errors[m] = rmse([r["rank"] for r in recs if r["rank"] is not None], cfg.r)
    al = [r["alignment"] for r in records
          if r["method"] == "proposed" and r.get("alignment") is not None]
    return StudyReport(cfg, cal.to_dict(), records, errors, failures,
                       float(np.median(al)) if al else None)
