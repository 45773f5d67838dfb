"""Command-line interface.

    subnewton run  --config cfg.json        # run an experiment
    subnewton gen  --spec spec.json --out d # generate a synthetic dataset
    subnewton diag --data path --gamma g    # print a SpectralReport

Exit codes: 0 success, 1 check failure, 2 usage or parse error.
SUBNEWTON_SEED overrides the solver seed from the config.
"""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateMatrixError,
    NumericError,
    SolverError,
)
from .experiment import (
    experiment_config_from_dict,
    run_experiment,
    synthetic_spec_from_dict,
)
from .loaders import ParseError, load_csv, load_libsvm, write_csv
from .problem import Problem, scaled_row_matrix
from .sketch import (
    BoundParams,
    SpectralReport,
    draw_sketch,
    effective_dimension,
    ridge_coherence,
    sample_size,
    sampling_probabilities,
    spectral_epsilon,
    subsampled_hessian,
)
from .synthetic import generate_synthetic

USAGE_ERROR = 2
CHECK_ERROR = 1


def _load_json(path: str) -> dict:
    with open(path, "r") as fh:
        return json.load(fh)


def _cmd_run(args) -> int:
    config = experiment_config_from_dict(_load_json(args.config))
    env_seed = os.environ.get("SUBNEWTON_SEED")
    if env_seed is not None:
        config.solver = dataclasses.replace(config.solver, seed=int(env_seed))
    return run_experiment(config)


def _cmd_gen(args) -> int:
    spec = synthetic_spec_from_dict(_load_json(args.spec))
    problem, truth = generate_synthetic(spec, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "data.csv"), problem.data)
    meta = {
        "n": problem.n,
        "d": problem.d,
        "loss": problem.loss_name,
        "gamma": problem.gamma,
        "reg": {"kind": problem.reg.kind, "lam": problem.reg.lam},
        "seed": args.seed,
        "d_eff": truth.d_eff,
        "coherence": truth.coherence,
        "kappa": truth.kappa,
        "w_star": truth.w_star.tolist(),
        "planted_w": truth.planted_w.tolist(),
        "singular_values": truth.singular_values.tolist(),
    }
    with open(os.path.join(args.out, "meta.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"wrote {args.out}/data.csv and {args.out}/meta.json")
    return 0


def _cmd_diag(args) -> int:
    if args.format == "libsvm" or (
        args.format == "auto" and args.data.endswith((".libsvm", ".svm"))
    ):
        dataset = load_libsvm(args.data, map_labels=(args.loss == "logistic"))
    else:
        dataset = load_csv(args.data, label_column=args.label_column)
    problem = Problem(data=dataset, loss_name=args.loss, gamma=args.gamma)
    w = np.zeros(problem.d)
    A = scaled_row_matrix(problem, w)
    d_eff = effective_dimension(A, args.gamma, problem.n)
    coherence = ridge_coherence(A, args.gamma, problem.n)
    H = A.T @ A / problem.n + args.gamma * np.eye(problem.d)
    evals = np.linalg.eigvalsh(H)
    kappa = float(evals[-1] / evals[0]) if evals[0] > 0 else float("inf")
    s = args.s
    if s is None:
        s = sample_size(
            BoundParams(epsilon=0.5, delta=0.1), d_eff, coherence, args.scheme
        )
    probs = sampling_probabilities(A, args.scheme, args.gamma)
    sketch = draw_sketch(probs, s, args.seed, scheme=args.scheme)
    H_tilde = subsampled_hessian(A, sketch, args.gamma, problem.n)
    report = SpectralReport(
        epsilon_measured=spectral_epsilon(H, H_tilde),
        d_eff=d_eff,
        coherence=coherence,
        kappa=kappa,
        s_used=s,
    )
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subnewton",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(func=_cmd_run)

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset")
    p_gen.add_argument("--spec", required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.set_defaults(func=_cmd_gen)

    p_diag = sub.add_parser("diag", help="print a SpectralReport for a dataset")
    p_diag.add_argument("--data", required=True)
    p_diag.add_argument("--format", choices=("auto", "csv", "libsvm"), default="auto")
    p_diag.add_argument("--label-column", type=int, default=0)
    p_diag.add_argument("--gamma", type=float, required=True)
    p_diag.add_argument("--loss", choices=("quadratic", "logistic"), default="quadratic")
    p_diag.add_argument("--s", type=int, default=None)
    p_diag.add_argument("--scheme", default="uniform")
    p_diag.add_argument("--seed", type=int, default=0)
    p_diag.set_defaults(func=_cmd_diag)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ValueError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ConvergenceError, NumericError, DegenerateMatrixError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CHECK_ERROR


if __name__ == "__main__":
    sys.exit(main())
