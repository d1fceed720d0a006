"""
Command-line front end.

Exit status: 0 on success, 1 on usage or input errors, 2 on numerical
failures. Every stochastic subcommand needs an explicit ``--seed`` (flag or
config file entry); identical arguments give byte-identical output.
"""
import argparse
import itertools
import json
import logging
import sys
from pathlib import Path

import numpy as np

from hdglm.bench.config import load_config
from hdglm.bench.experiments import SCENARIOS, Cell, ExperimentSpec, run_experiment
from hdglm.estimators.prox import prox_batch
from hdglm.estimators.surrogate import SurrogateFitter
from hdglm.exceptions import ModelSpecError, NumericalError
from hdglm.inference import HighDimInference
from hdglm.model_zoo.covariance import make_covariance
from hdglm.model_zoo.glm import link_from_params, make_model
from hdglm.model_zoo.io import read_dataset, write_dataset, write_vector
from hdglm.model_zoo.synthetic import SyntheticConfig, augment_with_noise, derive_seed, sample_dataset
from hdglm.state_evolution.solver import SeProblem, mc_standard_errors, residual_se, solve_se
from hdglm.version import version

logger = logging.getLogger(__name__)

META_KEYS = {"command", "config", "verbose", "func"}


class UsageError(ModelSpecError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(value):
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, str):
        return [float(v) for v in value.split(",") if v.strip()]
    return [float(v) for v in value]


def _require(params, *keys):
    for key in keys:
        if params.get(key) is None:
            raise UsageError(f"--{key.replace('_', '-')} is required (flag or config entry)")


def _emit_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _model(params):
    _require(params, "model")
    return make_model(params["model"], params)


def cmd_generate(params):
    _require(params, "n", "gamma2", "seed", "output")
    if params.get("p") is None and params.get("kappa") is None:
        raise UsageError("--p or --kappa is required")
    model = _model(params)
    config = SyntheticConfig(int(params["n"]), float(params["gamma2"]), int(params["seed"]),
                             p=params.get("p"), kappa=params.get("kappa"))
    cov = make_covariance(params.get("cov", "identity"), config.dim, float(params.get("rho", 0.5)))
    data = sample_dataset(config, model, cov)
    write_dataset(data, params["output"])
    logger.info("Wrote %d x %d dataset to %s", data.n, data.p, params["output"])
    _emit_json({"output": str(params["output"]), "n": data.n, "p": data.p, "model": model.name,
                "gamma2": float(params["gamma2"]), "seed": int(params["seed"])})
    return 0


def cmd_fit(params):
    _require(params, "dataset")
    model = _model(params)
    data = read_dataset(params["dataset"])
    result = SurrogateFitter(params).fit(data, model.link, float(params.get("lambda", 0.0)))
    if params.get("output"):
        write_vector(params["output"], result.beta_hat)
    _emit_json({"model": model.name, "n": data.n, "p": data.p, **result.summary()}, params.get("report"))
    if result.diverged:
        raise NumericalError("The surrogate estimate diverged (estimator does not exist?)")
    if not result.converged:
        raise NumericalError(f"Newton stopped after {result.iterations} iterations without converging")
    return 0


def cmd_calibrate(params):
    _require(params, "dataset", "seed")
    model = _model(params)
    data = read_dataset(params["dataset"])
    pipeline = HighDimInference({**params, "seed": int(params["seed"])})
    hyper = pipeline.calibrator.calibrate(data, model)
    _emit_json({"model": model.name, **hyper.as_dict()}, params.get("output"))
    return 0


def cmd_se_solve(params):
    _require(params, "kappa", "gamma2", "seed")
    model = _model(params)
    prob = SeProblem(
        kappa=float(params["kappa"]),
        gamma2=float(params["gamma2"]),
        model=model,
        lam=float(params.get("lambda", 0.0)),
        mc_samples=int(params.get("m", 200_000)),
        seed=int(params["seed"]),
        damping=float(params.get("damping", 0.5)),
        tol=float(params.get("tol", 1e-6)),
        max_iter=int(params.get("max_iter", 2000)),
    )
    panel = prob.panel()
    se = solve_se(prob, panel)
    _emit_json({
        "model": model.describe(),
        "kappa": prob.kappa, "gamma2": prob.gamma2, "lambda": prob.lam,
        "mc_samples": prob.mc_samples, "seed": prob.seed,
        "se_params": se.as_dict(),
        "residuals": residual_se(se, prob, panel)._asdict(),
        "mc_standard_errors": mc_standard_errors(se, prob, panel)._asdict(),
    }, params.get("output"))
    return 0


def _write_report(report, params):
    if params.get("output"):
        report.to_csv(params["output"])
    else:
        report.rows.to_csv(sys.stdout, index=False, float_format="%.10g", lineterminator="\n")


def cmd_se_figures(params):
    _require(params, "gamma2", "seed")
    model_name = params.get("model")
    _model(params)
    n = int(params.get("n", 4000))
    grid = [Cell(n, k, float(params["gamma2"]), model_name) for k in _floats(params.get("kappas", "0.1,0.2,0.3,0.4,0.5"))]
    spec = ExperimentSpec("SeCurves", grid, int(params.get("reps", 100)), int(params["seed"]), params={
        **params,
        "se_mc_samples": int(params.get("m", 50_000)),
        "record_wall_time": False,
        "progress": bool(params.get("progress", False)),
    })
    _write_report(run_experiment(spec), params)
    return 0


def cmd_infer(params):
    _require(params, "dataset", "seed")
    data = read_dataset(params["dataset"])
    if params.get("extra_p"):
        data = augment_with_noise(data, int(params["extra_p"]), derive_seed(int(params["seed"]), 1))
        logger.info("Augmented design to %d x %d", data.n, data.p)
    pipeline = HighDimInference({
        **params,
        "seed": int(params["seed"]),
        "mc_samples": int(params.get("m", 200_000)),
        "lambda": float(params.get("lambda", 0.0)),
        "alpha": float(params.get("alpha", 0.1)),
    })
    pipeline.fit(data)
    if not pipeline.fit_result.converged:
        raise NumericalError("The estimator did not converge; intervals are not available")
    reports = pipeline.intervals(data)
    prefix = params.get("output", "infer")
    main_key = "debiased_ridge" if pipeline.lam > 0 else "corrected"
    reports[main_key].to_csv(f"{prefix}.csv")
    _emit_json({
        "model": pipeline.model.describe(),
        "fit": pipeline.fit_result.summary(),
        "reports": {key: rep.as_dict() for key, rep in reports.items()},
    }, f"{prefix}.json")
    sys.stdout.write(f"{prefix}.json\n{prefix}.csv\n")
    return 0


def cmd_coverage(params):
    _require(params, "seed")
    scenario = params.get("scenario", "CoverageComparison")
    model_name = params.get("model", "poisson-clippedexp")
    make_model(model_name, params)
    grid = [
        Cell(int(params.get("n", 1000)), k, g2, model_name, float(params.get("alpha", 0.1)),
             params.get("cov", "identity"), float(params.get("rho", 0.5)))
        for k, g2 in itertools.product(_floats(params.get("kappas", "0.1,0.3,0.5")),
                                       _floats(params.get("gamma2s", "1")))
    ]
    spec = ExperimentSpec(scenario, grid, int(params.get("reps", 200)), int(params["seed"]), params={
        **params,
        "se_mc_samples": int(params.get("se_m", 50_000)),
        "record_wall_time": bool(params.get("timings", False)),
        "progress": bool(params.get("progress", False)),
    })
    _write_report(run_experiment(spec), params)
    return 0


def cmd_prox_eval(params):
    _require(params, "x", "eta", "link")
    link = link_from_params(str(params["link"]).lower(), params)
    x = np.asarray(_floats(params["x"]))
    z = prox_batch(x, float(params["eta"]), link)
    _emit_json({"link": link.describe(), "eta": float(params["eta"]),
                "x": [float(v) for v in x], "prox": [float(v) for v in z]}, params.get("output"))
    return 0


def _model_options(sub):
    sub.add_argument("--model", help="<law>-<link>, e.g. poisson-clippedexp")
    sub.add_argument("--threshold", type=float, help="ClippedExp threshold (50)")
    sub.add_argument("--slope-pos", type=float, help="Piecewise slope (5)")
    sub.add_argument("--slope-neg", type=float, help="Piecewise slope (0.1)")
    sub.add_argument("--shift", type=float, help="Logistic shift (0)")
    sub.add_argument("--sigma-e2", type=float, help="Gaussian noise variance (0.04)")


def build_parser():
    parser = _Parser(prog="hdglm", description="High-dimensional GLM inference toolkit")
    parser.add_argument("--version", action="version", version=version)
    parser.add_argument("--config", help="flat 'key = value' config file; flags override it")
    parser.add_argument("--verbose", "-v", action="count", default=0)
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("generate", help="sample a synthetic dataset")
    _model_options(sub)
    sub.add_argument("--n", type=int)
    sub.add_argument("--p", type=int)
    sub.add_argument("--kappa", type=float)
    sub.add_argument("--gamma2", type=float)
    sub.add_argument("--cov", choices=["identity", "ar1"])
    sub.add_argument("--rho", type=float)
    sub.add_argument("--seed", type=int)
    sub.add_argument("-o", "--output")
    sub.set_defaults(func=cmd_generate)

    sub = subs.add_parser("fit", help="surrogate (or ridge) estimate from a CSV")
    sub.add_argument("dataset")
    _model_options(sub)
    sub.add_argument("--lambda", type=float, help="raw ridge penalty (0)")
    sub.add_argument("-o", "--output", help="coefficient CSV")
    sub.add_argument("--report", help="JSON convergence report (stdout if omitted)")
    sub.set_defaults(func=cmd_fit)

    sub = subs.add_parser("calibrate", help="estimate gamma2, sigma_e2 and tau_j^2")
    sub.add_argument("dataset")
    _model_options(sub)
    sub.add_argument("--calibration-samples", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("-o", "--output")
    sub.set_defaults(func=cmd_calibrate)

    sub = subs.add_parser("se-solve", help="solve the state-evolution system")
    _model_options(sub)
    sub.add_argument("--kappa", type=float)
    sub.add_argument("--gamma2", type=float)
    sub.add_argument("--lambda", type=float, help="ridge level on the averaged-loss scale (0)")
    sub.add_argument("--m", type=int, help="Monte-Carlo panel size (200000)")
    sub.add_argument("--damping", type=float)
    sub.add_argument("--tol", type=float)
    sub.add_argument("--max-iter", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("-o", "--output")
    sub.set_defaults(func=cmd_se_solve)

    sub = subs.add_parser("se-figures", help="state-evolution curves over a kappa grid (CSV)")
    _model_options(sub)
    sub.add_argument("--kappas")
    sub.add_argument("--gamma2", type=float)
    sub.add_argument("--n", type=int)
    sub.add_argument("--reps", type=int)
    sub.add_argument("--m", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--progress", action="store_true", default=None)
    sub.add_argument("-o", "--output")
    sub.set_defaults(func=cmd_se_figures)

    sub = subs.add_parser("infer", help="calibrate, solve and build intervals from a CSV")
    sub.add_argument("dataset")
    _model_options(sub)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--lambda", type=float, help="raw ridge penalty (0)")
    sub.add_argument("--m", type=int)
    sub.add_argument("--extra-p", type=int, help="append this many N(0, 1) noise columns before fitting (0)")
    sub.add_argument("--calibration-samples", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("-o", "--output", help="output prefix for .json and .csv")
    sub.set_defaults(func=cmd_infer)

    sub = subs.add_parser("coverage", help="run a simulation experiment grid (CSV)")
    _model_options(sub)
    sub.add_argument("--scenario", choices=SCENARIOS)
    sub.add_argument("--n", type=int)
    sub.add_argument("--kappas")
    sub.add_argument("--gamma2s")
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--cov", choices=["identity", "ar1"])
    sub.add_argument("--rho", type=float)
    sub.add_argument("--reps", type=int)
    sub.add_argument("--se-m", type=int)
    sub.add_argument("--calibration-samples", type=int)
    sub.add_argument("--oracle-se", action="store_true", default=None)
    sub.add_argument("--lambda", type=float)
    sub.add_argument("--workers", type=int)
    sub.add_argument("--timings", action="store_true", default=None)
    sub.add_argument("--progress", action="store_true", default=None)
    sub.add_argument("--seed", type=int)
    sub.add_argument("-o", "--output")
    sub.set_defaults(func=cmd_coverage)

    sub = subs.add_parser("prox-eval", help="evaluate prox_{eta G} at comma-separated points")
    sub.add_argument("--link", help="link family")
    sub.add_argument("--threshold", type=float)
    sub.add_argument("--slope-pos", type=float)
    sub.add_argument("--slope-neg", type=float)
    sub.add_argument("--shift", type=float)
    sub.add_argument("--x")
    sub.add_argument("--eta", type=float)
    sub.add_argument("-o", "--output")
    sub.set_defaults(func=cmd_prox_eval)
    return parser


def _params(args):
    params = load_config(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key not in META_KEYS and value is not None:
            params[key] = value
    return params


def cli_main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
            format="%(asctime)s - %(levelname)s - %(message)s",
        )
        return args.func(_params(args))
    except ModelSpecError as err:
        print(f"hdglm: error: {err}", file=sys.stderr)
        return 1
    except NumericalError as err:
        print(f"hdglm: numerical failure ({type(err).__name__}): {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"hdglm: error: {err}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
