"""Command-line interface: ``rfr {estimate,calibrate,mtfa,experiment,simulate}``.

Exit codes: 0 success, 1 input or usage error, 2 solver did not converge.
JSON payloads carry ``schema_version`` and are byte-identical for
identical flags and seed.
"""

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .calibration import DEFAULT_ALPHA, DEFAULT_DRAWS, against_covariance, calibrate, delta_max
from .dual import SolverOptions, admm_solve
from .errors import FactorRankError
from .experiments import StudyConfig, generate_factor_model, run_study, sample_data
from .ingestion import load_matrix_csv, sample_covariance, validate_spd, write_matrix_csv
from .mtfa import mtfa_decompose
from .recovery import recover_decomposition

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2

log = logging.getLogger("robust_factor_rank")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _dumps(payload):
    return json.dumps(_clean(payload), sort_keys=True, indent=2)


def _emit(args, command, payload):
    payload = {"schema_version": SCHEMA_VERSION, "command": command, **payload}
    if args.out == "json":
        print(_dumps(payload))
        return
    for key in sorted(payload):
        val = _clean(payload[key])
        if isinstance(val, (dict, list)):
            val = json.dumps(val, sort_keys=True)
        print(f"{key}: {val}")


def _default_seed():
    raw = os.environ.get("RFR_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"RFR_SEED must be an integer, got {raw!r}") from None


def _solver_opts(args):
    kw = {}
    for name in ("rho", "eps_rel", "eps_abs", "max_iter"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    return kw


def _write_spectrum(path, values):
    if path:
        rows = [(i, v) for i, v in enumerate(values, start=1)]
        write_matrix_csv(path, np.array(rows, dtype=float).reshape(-1, 2),
                         header=["index", "eigenvalue"])


def _read_cov(path):
    return validate_spd(load_matrix_csv(path).values)


def cmd_estimate(args):
    if (args.data is None) == (args.cov is None):
        raise UsageError("give exactly one of --data or --cov")
    if args.cov is not None:
        if args.n_samples is None:
            raise UsageError("--cov needs --n-samples")
        S = _read_cov(args.cov)
        N = args.n_samples
    else:
        Y = load_matrix_csv(args.data, has_header=args.header)
        N = Y.rows
        S = validate_spd(sample_covariance(Y, center=args.center))
    dmax = delta_max(S)
    if args.delta is not None:
        delta, cal = args.delta, None
    else:
        cal = calibrate(S.n, N, args.alpha, args.calib, args.draws, args.seed)
        cal = against_covariance(cal, S, strict=True)
        delta = cal.delta_alpha
    opts = SolverOptions(**_solver_opts(args))
    sol = admm_solve(S, delta, opts, trace_path=args.trace)
    payload = {"n": S.n, "N": N, "delta": delta, "delta_max": dmax,
               "delta_source": "user" if cal is None else "calibrated",
               "calibration": None if cal is None else cal.to_dict()}
    try:
        dec = recover_decomposition(sol, S, delta)
    except FactorRankError as e:
        if sol.converged:
            raise
        payload.update(converged=False, iterations=sol.iterations,
                       lambda_star=sol.lambda_star, dual_objective=sol.objective,
                       error=f"{type(e).__name__}: {e}")
        _emit(args, "estimate", payload)
        return EXIT_NOT_CONVERGED
    payload.update(dec.to_dict())
    _write_spectrum(args.spectrum_csv, payload["eigenvalues_L"])
    _emit(args, "estimate", payload)
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_calibrate(args):
    cal = calibrate(args.n, args.n_samples, args.alpha, args.method, args.draws, args.seed)
    if args.cov is not None:
        S = _read_cov(args.cov)
        if S.n != args.n:
            raise UsageError(f"--cov is {S.n}x{S.n} but --n is {args.n}")
        cal = against_covariance(cal, S, strict=False)
    payload = cal.to_dict()
    if args.cov is not None:
        payload["usable"] = cal.usable
        payload["note"] = ("delta_alpha < delta_max: the trivial solution L = 0 is ruled out"
                           if cal.usable else
                           "delta_alpha >= delta_max: a diagonal covariance lies in the ball "
                           "and the estimate would be L = 0")
    _emit(args, "calibrate", payload)
    return EXIT_OK


def cmd_mtfa(args):
    S = _read_cov(args.cov)
    kw = _solver_opts(args)
    kw.setdefault("max_iter", 20000)
    rho = kw.pop("rho", 1.0)
    res = mtfa_decompose(S, SolverOptions(**kw), rho=rho)
    payload = {"n": S.n, **res.to_dict()}
    _write_spectrum(args.spectrum_csv, payload["eigenvalues_L"])
    _emit(args, "mtfa", payload)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_experiment(args):
    try:
        cfg = StudyConfig.from_json(args.config)
    except json.JSONDecodeError as e:
        raise UsageError(f"malformed config {args.config}: {e}") from None
    except TypeError as e:
        raise UsageError(f"bad config {args.config}: {e}") from None
    rep = run_study(cfg)
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(_dumps({"schema_version": SCHEMA_VERSION, "command": "experiment",
                             **rep.to_dict()}) + "\n")
    if args.csv_out:
        rep.write_csv(args.csv_out)
    payload = {"config": cfg.to_dict(), "rmse": rep.rmse, "failures": rep.failures,
               "alignment_median": rep.alignment_median, "calibration": rep.calibration,
               "ranks": {m: rep.ranks(m) for m in cfg.methods}}
    _emit(args, "experiment", payload)
    return EXIT_OK


def cmd_simulate(args):
    model = generate_factor_model(args.n, args.r, args.seed, args.snr_norm)
    Y = sample_data(model, args.n_samples, args.seed + 1)
    write_matrix_csv(args.output, Y.values)
    if args.truth:
        write_matrix_csv(args.truth, model.sigma_true)
    return EXIT_OK


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--rho", type=float, help="ADMM penalty")
    g.add_argument("--eps-rel", type=float, help="relative stopping tolerance")
    g.add_argument("--eps-abs", type=float, help="absolute stopping tolerance")
    g.add_argument("--max-iter", type=int, help="iteration cap")


def build_parser():
    seed = _default_seed()
    parser = _Parser(prog="rfr", description="Robust estimation of the number of factors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("estimate", help="estimate the number of factors")
    p.add_argument("--data", help="CSV of observations, one row each ('-' for stdin)")
    p.add_argument("--header", action="store_true", help="skip the first line of --data")
    p.add_argument("--center", action="store_true", help="subtract column means first")
    p.add_argument("--cov", help="CSV of a sample covariance")
    p.add_argument("--n-samples", type=int, help="sample size behind --cov")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--delta", type=float, help="KL tolerance; skips calibration")
    p.add_argument("--calib", choices=("empirical", "goe"), default="empirical")
    p.add_argument("--draws", type=int, default=DEFAULT_DRAWS)
    p.add_argument("--seed", type=int, default=seed)
    _add_solver_flags(p)
    p.add_argument("--out", choices=("json", "text"), default="json")
    p.add_argument("--spectrum-csv", help="write (index, eigenvalue) of L* here")
    p.add_argument("--trace", help="write per-iteration solver trace CSV here")
    p.set_defaults(func=cmd_estimate, usage=p.format_usage)

    p = sub.add_parser("calibrate", help="Monte Carlo KL tolerance")
    p.add_argument("--n", type=int, required=True, help="dimension")
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--method", choices=("empirical", "goe"), default="empirical")
    p.add_argument("--draws", type=int, default=DEFAULT_DRAWS)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--cov", help="check the tolerance against this covariance")
    p.add_argument("--out", choices=("json", "text"), default="json")
    p.set_defaults(func=cmd_calibrate, usage=p.format_usage)

    p = sub.add_parser("mtfa", help="minimum trace factor analysis of a covariance")
    p.add_argument("--cov", required=True)
    _add_solver_flags(p)
    p.add_argument("--out", choices=("json", "text"), default="json")
    p.add_argument("--spectrum-csv")
    p.set_defaults(func=cmd_mtfa, usage=p.format_usage)

    p = sub.add_parser("experiment", help="Monte Carlo study from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--json-out", help="full report with per-run records")
    p.add_argument("--csv-out", help="one row per run and method")
    p.add_argument("--out", choices=("json", "text"), default="json")
    p.set_defaults(func=cmd_experiment, usage=p.format_usage)

    p = sub.add_parser("simulate", help="write synthetic factor-model data as CSV")
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--snr-norm", choices=("fro", "spectral", "trace"), default="fro")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--output", required=True, help="CSV path ('-' for stdout)")
    p.add_argument("--truth", help="also write the true covariance here")
    p.set_defaults(func=cmd_simulate, usage=p.format_usage)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"rfr: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        sys.stderr.write(args.usage())
        print(f"rfr {args.command}: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (FactorRankError, ValueError, OSError) as e:
        print(f"rfr {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
