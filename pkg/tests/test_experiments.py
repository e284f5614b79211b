import csv
import json
import math

import numpy as np
import pytest

from robust_factor_rank import experiments
from robust_factor_rank.errors import EmptyInput, InvalidRank, StepFailure, StudyFailure
from robust_factor_rank.experiments import (StudyConfig, generate_factor_model,
                                            ledermann_bound, rmse, run_study,
                                            sample_data)
from robust_factor_rank.ingestion import sample_covariance

SMALL = dict(n=10, r=2, N=200, runs=3, draws=500, seed=4)


def test_ledermann_values():
    assert ledermann_bound(1) == 0
    assert ledermann_bound(40) == 31
    assert ledermann_bound(3) == 1  # 8n+1 = 25 is a perfect square


def test_ledermann_matches_float_formula_and_is_monotone():
    prev = -1
    for n in range(1, 101):
        b = ledermann_bound(n)
        assert b == math.floor((2 * n + 1 - math.sqrt(8 * n + 1)) / 2)
        assert b >= prev
        prev = b


def test_model_rank_snr_determinism():
    m = generate_factor_model(40, 4, seed=8)
    assert np.linalg.matrix_rank(m.L) == 4
    assert np.linalg.norm(m.L) / np.linalg.norm(m.D) == pytest.approx(1.0, abs=1e-10)
    d = np.diag(m.D)
    assert np.all(d > 0)
    m2 = generate_factor_model(40, 4, seed=8)
    assert m.sigma_true.tobytes() == m2.sigma_true.tobytes()


@pytest.mark.parametrize("norm,ord_", [("spectral", 2), ("trace", "nuc")])
def test_model_other_snr_norms(norm, ord_):
    m = generate_factor_model(20, 3, seed=1, snr_norm=norm)
    assert np.linalg.norm(m.L, ord_) / np.linalg.norm(m.D, ord_) == pytest.approx(1.0, abs=1e-10)


def test_model_invalid_rank():
    with pytest.raises(InvalidRank):
        generate_factor_model(40, 32, seed=0)
    with pytest.raises(InvalidRank):
        generate_factor_model(40, 0, seed=0)
    with pytest.raises(ValueError):
        generate_factor_model(10, 2, seed=0, snr_norm="max")


def test_sample_data_consistency():
    m = generate_factor_model(10, 2, seed=3)
    S = sample_covariance(sample_data(m, 100_000, seed=0))
    assert np.linalg.norm(S - m.sigma_true) <= 0.05 * np.linalg.norm(m.sigma_true)


def test_sample_data_shapes_and_seeds():
    m = generate_factor_model(5, 1, seed=0)
    assert sample_data(m, 1, seed=0).values.shape == (1, 5)
    a = sample_data(m, 10, seed=1).values
    b = sample_data(m, 10, seed=2).values
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, sample_data(m, 10, seed=1).values)


def test_rmse():
    assert rmse([4, 4, 4], 4) == 0.0
    assert rmse([5, 5, 5, 5], 4) == 1.0
    assert rmse([2, 6], 4) == 2.0
    with pytest.raises(EmptyInput):
        rmse([], 4)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        StudyConfig(n=10, N=10)
    with pytest.raises(ValueError):
        StudyConfig(runs=0)
    with pytest.raises(ValueError):
        StudyConfig(methods=("proposed", "oracle"))
    with pytest.raises(InvalidRank):
        StudyConfig(n=5, r=4)
    with pytest.raises(ValueError):
        StudyConfig.from_dict({"n": 10, "colour": "red"})
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"n": 12, "r": 2, "N": 300, "solver": {"rho": 0.5}}))
    cfg = StudyConfig.from_json(p)
    assert (cfg.n, cfg.r, cfg.N, cfg.solver.rho) == (12, 2, 300, 0.5)
    assert StudyConfig.from_dict(cfg.to_dict()) == cfg


def test_study_runs_and_is_deterministic():
    cfg = StudyConfig(**SMALL)
    a = run_study(cfg)
    b = run_study(cfg)
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
    assert len(a.records) == 2 * cfg.runs
    assert all("wall_time" in r for r in a.records)
    assert all("wall_time" not in r for r in a.to_dict()["records"])


def test_study_self_consistency():
    cfg = StudyConfig(**SMALL)
    rep = run_study(cfg)
    for m in cfg.methods:
        ranks = rep.ranks(m)
        assert rep.rmse[m] == pytest.approx(rmse(ranks, cfg.r))
        sq = [r["sq_error"] for r in rep.records if r["method"] == m]
        assert rep.rmse[m] == pytest.approx(math.sqrt(np.mean(sq)))
    al = [r["alignment"] for r in rep.records if r["method"] == "proposed"]
    assert rep.alignment_median == pytest.approx(float(np.median(al)))


def test_study_csv(tmp_path):
    rep = run_study(StudyConfig(**{**SMALL, "methods": ("proposed",), "runs": 2}))
    path = tmp_path / "runs.csv"
    rep.write_csv(path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert set(rows[0]) == {"run", "method", "rank", "sq_error", "alignment", "wall_time", "error"}


def test_study_failure_threshold(monkeypatch):
    def broken(*args, **kwargs):
        raise StepFailure(1)

    monkeypatch.setattr(experiments, "admm_solve", broken)
    with pytest.raises(StudyFailure):
        run_study(StudyConfig(**{**SMALL, "methods": ("proposed",)}))


def test_study_records_isolated_failures(monkeypatch):
    real = experiments.admm_solve
    calls = []

    def flaky(*args, **kwargs):
        calls.append(1)
        if len(calls) == 1:
            raise StepFailure(7)
        return real(*args, **kwargs)

    monkeypatch.setattr(experiments, "admm_solve", flaky)
    rep = run_study(StudyConfig(**{**SMALL, "methods": ("proposed",), "runs": 5}))
    assert rep.failures["proposed"] == 1
    assert "StepFailure" in rep.records[0]["error"]
    assert len(rep.ranks("proposed")) == 4


def test_rmse_trend_in_N():
    base = dict(n=40, r=4, runs=20, methods=("proposed",), draws=2000, seed=0)
    lo = run_study(StudyConfig(N=200, **base))
    hi = run_study(StudyConfig(N=1000, **base))
    assert hi.rmse["proposed"] <= lo.rmse["proposed"] + 0.5
