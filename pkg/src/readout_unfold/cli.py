"""Command-line front end.

Every subcommand reads JSON inputs, writes JSON/CSV outputs and a
``<output>.manifest.json`` recording the resolved parameters and input
digests.  Exit codes: 0 success, 2 invalid input, 3 numerical failure.
Errors are reported as a single JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
from scipy.stats import skew

from . import __version__
from . import io
from .core import MAX_QUBITS, fold
from .errors import NumericalError, ValidationError
from .noisefit import fit_report
from .response import (
    NoiseModel,
    build_from_calibration,
    from_noise_model,
    simulate_calibration,
    tridiagonal_example,
    two_level_example,
)
from .sim import TruthSpec, apply_readout_noise, pseudo_experiments, sample_counts, truth_vector
from .uncertainty import COMPONENTS, UncertaintyReport, uncertainty_scan
from .unfold import UnfoldConfig, unfold

#: readout rates used when no response matrix is supplied to `pseudo`
DEFAULT_P01 = 0.032
DEFAULT_P10 = 0.075

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class CliError(ValidationError):
    pass


def _manifest(args, outputs, inputs=None):
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
    io.write_manifest(f"{outputs[0]}.manifest.json", args.command, params, inputs or {}, outputs)


def _check_qubits(n):
    if n is not None and not 1 <= n <= MAX_QUBITS:
        raise CliError(f"qubit count must be between 1 and {MAX_QUBITS}, got {n}")


def _check_size(size):
    if size > 2**MAX_QUBITS:
        raise CliError(f"state space of {size} exceeds the {MAX_QUBITS}-qubit cap")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _config(args) -> UnfoldConfig:
    prior = args.prior if args.prior == "uniform" else io.read_vector(args.prior)
    return UnfoldConfig(args.method, args.iterations, prior, args.ls_tol, args.ls_max_iter)


def _read_response(path):
    R = io.read_response(path)
    _check_size(R.size)
    return R


# -- subcommands -------------------------------------------------------------


def cmd_gen_truth(args):
    n = args.bins if args.truth == "binned_gaussian" else args.qubits
    if n is None:
        raise CliError("--bins is required for binned_gaussian, --qubits otherwise")
    if args.truth != "binned_gaussian":
        _check_qubits(n)
    t = truth_vector(args.truth, n, args.sigma)
    if args.shots is None:
        io.write_probabilities(t, args.out)
    else:
        if args.seed is None:
            raise CliError("--seed is required when sampling with --shots")
        io.write_counts(sample_counts(t, args.shots, args.seed), args.out)
    _manifest(args, [args.out])


def cmd_fold(args):
    R = _read_response(args.response)
    t = io.read_vector(args.vector)
    io.write_probabilities(fold(R, t), args.out)
    _manifest(args, [args.out], {"response": args.response, "vector": args.vector})


def cmd_apply_noise(args):
    R = _read_response(args.response)
    counts = io.read_counts(args.counts)
    io.write_counts(apply_readout_noise(R, counts, args.seed), args.out)
    _manifest(args, [args.out], {"response": args.response, "counts": args.counts})


def cmd_calibrate(args):
    if args.calibration:
        R = build_from_calibration(io.read_calibration(args.calibration))
        io.write_response(R, args.out)
        _manifest(args, [args.out], {"calibration": args.calibration})
        return
    if args.shots is None or args.seed is None:
        raise CliError("simulating calibration data needs --shots and --seed")
    if args.response:
        R = _read_response(args.response)
    elif args.noise_model:
        nm = io.read_noise_model(args.noise_model)
        _check_qubits(nm.n_qubits)
        R = from_noise_model(nm)
    else:
        raise CliError("give --calibration, or --response/--noise-model to simulate calibration data")
    io.write_calibration(simulate_calibration(R, args.shots, args.seed), args.out)
    _manifest(args, [args.out], {"response": args.response, "noise_model": args.noise_model})


def cmd_unfold(args):
    R = _read_response(args.response)
    m = io.read_vector(args.measured)
    io.write_unfold_result(unfold(R, m, _config(args)), args.out)
    prior = None if args.prior == "uniform" else args.prior
    _manifest(args, [args.out], {"response": args.response, "measured": args.measured, "prior": prior})


def cmd_fit_noise(args):
    R = _read_response(args.response)
    if R.n_qubits is None or R.n_qubits > 10:
        raise CliError("fit-noise needs a qubit-indexed response with at most 10 qubits")
    report = fit_report(R)
    doc = {"schema": io.SCHEMA, "type": "noise_fit", **report}
    doc["conditioned"] = {str(q): v for q, v in report["conditioned"].items()}
    io.write_json(doc, args.out)
    outputs = [args.out]
    if args.csv:
        rows = []
        for q in range(R.n_qubits):
            rows.append(["global", q, "", report["global"]["p01"], report["global"]["p10"]])
            rows.append(["per_qubit", q, "", report["per_qubit"]["p01"][q], report["per_qubit"]["p10"][q]])
            c = report["conditioned"][q]
            for k, (a, b) in enumerate(zip(c["p01_list"], c["p10_list"])):
                rows.append(["conditioned", q, k, a, b])
        io.write_csv(args.csv, ["kind", "qubit", "context", "p01", "p10"], rows)
        outputs.append(args.csv)
    _manifest(args, outputs, {"response": args.response})


def _scan_inputs(args):
    calib = io.read_calibration(args.calibration) if args.calibration else None
    R = _read_response(args.response) if args.response else None
    if calib is None and R is None:
        raise CliError("give --calibration and/or --response")
    m = io.read_counts(args.measured)
    R_alt = _read_response(args.alt_response) if args.alt_response else None
    truth = io.read_vector(args.truth) if args.truth else None
    return calib, R, m, R_alt, truth


def _scan_input_paths(args):
    return {
        "calibration": args.calibration,
        "response": args.response,
        "measured": args.measured,
        "alt_response": args.alt_response,
        "truth": args.truth,
        "prior": None if args.prior == "uniform" else args.prior,
    }


def cmd_bootstrap(args):
    from .uncertainty import (
        bootstrap_measurement,
        bootstrap_response,
        nonclosure,
        perturbed_response,
        systematic_response,
    )

    calib, R, m, R_alt, truth = _scan_inputs(args)
    R = build_from_calibration(calib) if R is None else R
    cfg = _config(args)
    comps = {"stat_m": bootstrap_measurement(R, m, cfg, args.B, args.seed, args.threads)}
    if calib is not None:
        comps["stat_R"] = bootstrap_response(calib, m, cfg, args.B, args.seed, args.threads)
    if cfg.method == "ibu":
        comps["nonclosure"] = nonclosure(R, m, cfg)
    comps["systematic_R"] = systematic_response(R, R_alt if R_alt is not None else perturbed_response(R, args.lam), m, cfg)
    report = UncertaintyReport(cfg.iterations, {c: comps[c] for c in COMPONENTS if c in comps})
    bias = mse_ = None
    if truth is not None:
        est = unfold(R, m, cfg).estimate
        bias, mse_ = float(np.mean(np.abs(est - truth))), float(np.mean((est - truth) ** 2))
    a = report.averaged
    row = [cfg.iterations, a.get("stat_m"), a.get("stat_R"), a.get("nonclosure"), a.get("systematic_R"), report.total, bias, mse_]
    io.write_csv(args.out, io.SCAN_HEADER, [row])
    outputs = [args.out]
    if args.report:
        io.write_json(io.uncertainty_doc(report), args.report)
        outputs.append(args.report)
    _manifest(args, outputs, _scan_input_paths(args))


def cmd_scan(args):
    calib, R, m, R_alt, truth = _scan_inputs(args)
    cfg = _config(args)
    if cfg.method != "ibu":
        raise CliError("scan applies to --method ibu only")
    table = uncertainty_scan(calib, R, m, args.iterations_list, args.B, args.seed, args.lam, cfg, R_alt, truth, args.threads)
    io.write_scan_csv(table, args.out)
    summary = {
        "schema": io.SCHEMA,
        "type": "scan_summary",
        "recommended_iterations": table.recommended(),
        "baselines": table.baselines,
    }
    if truth is not None:
        summary["min_bias_iterations"] = table.best_bias()
    summary_path = f"{args.out}.summary.json"
    io.write_json(summary, summary_path)
    print(json.dumps(summary))
    _manifest(args, [args.out, summary_path], _scan_input_paths(args))


def cmd_pseudo(args):
    if args.truth == "binned_gaussian":
        raise CliError("pseudo-experiments need a qubit-indexed truth (gaussian or w_state)")
    _check_qubits(args.qubits)
    if args.response:
        R = _read_response(args.response)
    else:
        R = from_noise_model(NoiseModel.uniform(args.qubits, args.p01, args.p10))
    methods = [UnfoldConfig(mm).method for mm in args.methods.split(",") if mm]
    if not methods:
        raise CliError("--methods is empty")
    cfg = UnfoldConfig("ibu", args.iterations, "uniform", args.ls_tol, args.ls_max_iter)
    rep = pseudo_experiments(
        TruthSpec(args.truth, args.qubits, args.sigma),
        R,
        args.shots,
        args.experiments,
        methods,
        cfg,
        args.seed,
        args.threads,
        args.reference,
    )

    def rows():
        for meth in rep.methods:
            for k in range(rep.n_experiments):
                for s in range(rep.truth.shape[1]):
                    yield [meth, k, s, rep.truth[k, s], rep.predicted[meth][k, s]]

    io.write_csv(args.out, ["method", "experiment", "state", "true", "predicted"], rows())
    summary = {
        "schema": io.SCHEMA,
        "type": "pseudo_summary",
        "shots": rep.shots,
        "experiments": rep.n_experiments,
        "methods": {
            meth: {
                "std": rep.std(meth),
                "mean": rep.mean(meth),
                "standard_error": rep.standard_error(meth),
                "skewness": float(skew(rep.differences(meth))),
            }
            for meth in rep.methods
        },
    }
    summary_path = f"{args.out}.summary.json"
    io.write_json(summary, summary_path)
    print(json.dumps(summary))
    _manifest(args, [args.out, summary_path], {"response": args.response})


def cmd_examples(args):
    if args.name == "eq1":
        R = two_level_example(args.eps)
    elif args.name == "eq2":
        _check_size(args.bins)
        R = tridiagonal_example(args.bins, args.eps)
    else:
        _check_qubits(args.qubits)
        R = from_noise_model(NoiseModel.uniform(args.qubits, args.p01, args.p10))
    io.write_response(R, args.out)
    _manifest(args, [args.out])


# -- parser ------------------------------------------------------------------


def _unfold_options(p, default_method="ibu"):
    p.add_argument("--method", choices=["inversion", "ls", "ibu"], default=default_method)
    p.add_argument("--iterations", type=_positive_int, default=10, help="IBU iterations")
    p.add_argument("--prior", default="uniform", help="'uniform' or a vector JSON file")
    p.add_argument("--ls-tol", type=float, default=1e-10)
    p.add_argument("--ls-max-iter", type=_positive_int, default=100_000)


def _scan_options(p):
    p.add_argument("--calibration", help="calibration JSON (enables stat_R)")
    p.add_argument("--response", help="nominal response JSON (default: built from --calibration)")
    p.add_argument("--measured", required=True)
    p.add_argument("--truth", help="true counts JSON, adds bias and mse columns")
    p.add_argument("--alt-response", help="alternate response for the systematic component")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01, help="extra flip rate for the default alternate response")
    p.add_argument("--B", type=int, default=200, help="bootstrap replicas")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="readout-unfold", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-truth", help="write a truth distribution or sampled truth counts")
    p.add_argument("--truth", choices=["gaussian", "w_state", "binned_gaussian"], required=True)
    p.add_argument("--qubits", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--sigma", type=float, default=3.5)
    p.add_argument("--shots", type=_positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_truth)

    p = sub.add_parser("fold", help="forward-fold a vector: m = R t")
    p.add_argument("--response", required=True)
    p.add_argument("--vector", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fold)

    p = sub.add_parser("apply-noise", help="misread true counts shot by shot")
    p.add_argument("--response", required=True)
    p.add_argument("--counts", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_apply_noise)

    p = sub.add_parser("calibrate", help="build R from calibration data, or simulate calibration data")
    p.add_argument("--calibration")
    p.add_argument("--response")
    p.add_argument("--noise-model")
    p.add_argument("--shots", type=_positive_int, help="shots per prepared state when simulating")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("unfold", help="unfold a measured spectrum")
    p.add_argument("--response", required=True)
    p.add_argument("--measured", required=True)
    p.add_argument("--out", required=True)
    _unfold_options(p)
    p.set_defaults(func=cmd_unfold)

    p = sub.add_parser("fit-noise", help="fit global and per-qubit flip rates to R")
    p.add_argument("--response", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also write plot-ready transition probabilities")
    p.set_defaults(func=cmd_fit_noise)

    p = sub.add_parser("bootstrap", help="uncertainty components at one setting")
    _scan_options(p)
    _unfold_options(p)
    p.add_argument("--report", help="also write the per-state UncertaintyReport JSON")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("scan", help="uncertainty and bias versus IBU iterations")
    _scan_options(p)
    _unfold_options(p)
    p.add_argument("--iterations-list", type=_int_list, default=[1, 2, 3, 4, 5, 10, 20, 50, 100])
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("pseudo", help="pseudo-experiment pull study")
    p.add_argument("--truth", choices=["gaussian", "w_state", "binned_gaussian"], default="gaussian")
    p.add_argument("--qubits", type=int, default=5)
    p.add_argument("--sigma", type=float, default=3.5)
    p.add_argument("--response", help="response JSON (default: uniform flips with --p01/--p10)")
    p.add_argument("--p01", type=float, default=DEFAULT_P01)
    p.add_argument("--p10", type=float, default=DEFAULT_P10)
    p.add_argument("--shots", type=_positive_int, default=10_000)
    p.add_argument("--experiments", type=_positive_int, default=1000)
    p.add_argument("--methods", default="inversion,ls,ibu")
    p.add_argument("--iterations", type=_positive_int, default=100)
    p.add_argument("--ls-tol", type=float, default=1e-10)
    p.add_argument("--ls-max-iter", type=_positive_int, default=100_000)
    p.add_argument("--reference", choices=["sampled", "theory"], default="sampled")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--out", default="pseudo.csv")
    p.set_defaults(func=cmd_pseudo)

    p = sub.add_parser("examples", help="write one of the analytic example matrices")
    p.add_argument("--name", choices=["eq1", "eq2", "uniform-flip"], required=True)
    p.add_argument("--bins", type=int, default=21)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--qubits", type=int, default=5)
    p.add_argument("--p01", type=float, default=DEFAULT_P01)
    p.add_argument("--p10", type=float, default=DEFAULT_P10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_examples)
    return parser


def _fail(code: int, name: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": name, "message": message}) + "\n")
    return code


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except ValidationError as exc:
        return _fail(EXIT_INPUT, exc.code, str(exc))
    except NumericalError as exc:
        return _fail(EXIT_NUMERIC, exc.code, str(exc))
    except (OSError, ValueError) as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, str(exc))
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
