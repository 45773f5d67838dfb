"""Experiment orchestration: seeded trials, traces, aggregate report.

An experiment runs one solver configuration for `trials` seeds
(seed+0 ... seed+trials-1) on a fixed problem (loaded from disk or
generated synthetically), writes one trace CSV per trial plus a single
aggregate JSON, and prints a summary table.  Everything is a pure
function of the config, so re-running a config byte-reproduces all
outputs.
"""

import dataclasses
import json
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .loaders import load_csv, load_libsvm
from .problem import Problem, Regularizer
from .prox import ProxInner
from .sketch import BoundParams, SpectralReport
from .solvers import ConvergenceTrace, InexactSolve, SolverConfig, run
from .synthetic import GroundTruth, SyntheticSpec, generate_synthetic
from .verify import check_envelope


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment."""

    problem: dict
    solver: SolverConfig
    bound: BoundParams
    trials: int = 1
    output: str = "."
    data_seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


def _reg_from_dict(obj: Optional[dict]) -> Regularizer:
    if not obj:
        return Regularizer()
    return Regularizer(kind=obj.get("kind", "none"), lam=float(obj.get("lam", 0.0)))


def solver_config_from_dict(obj: dict) -> SolverConfig:
    inexact = obj.get("inexact")
    sspn_inner = obj.get("sspn_inner") or {}
    return SolverConfig(
        method=obj.get("method", "ssn"),
        scheme=obj.get("scheme", "uniform"),
        s=int(obj.get("s", 0)),
        m=int(obj.get("m", 1)),
        step_size=float(obj.get("step_size", 1.0)),
        inexact=None if not inexact else InexactSolve(float(inexact["epsilon0"])),
        max_outer=int(obj.get("max_outer", 20)),
        grad_tol=float(obj.get("grad_tol", 1e-8)),
        seed=int(obj.get("seed", 0)),
        sspn_inner=ProxInner(
            max_iter=int(sspn_inner.get("max_iter", 10000)),
            tol=sspn_inner.get("tol"),
        ),
    )


def bound_params_from_dict(obj: Optional[dict]) -> BoundParams:
    obj = obj or {}
    return BoundParams(
        epsilon=float(obj.get("epsilon", 0.25)),
        delta=float(obj.get("delta", 0.1)),
        constant_c=float(obj.get("constant_c", 4.0)),
        lipschitz_L=obj.get("lipschitz_L"),
    )


def experiment_config_from_dict(obj: dict) -> ExperimentConfig:
    if "problem" not in obj:
        raise ValueError("config needs a 'problem' section")
    return ExperimentConfig(
        problem=obj["problem"],
        solver=solver_config_from_dict(obj.get("solver", {})),
        bound=bound_params_from_dict(obj.get("bound")),
        trials=int(obj.get("trials", 1)),
        output=obj.get("output", "."),
        data_seed=int(obj.get("data_seed", 0)),
    )


def synthetic_spec_from_dict(obj: dict) -> SyntheticSpec:
    return SyntheticSpec(
        n=int(obj["n"]),
        d=int(obj["d"]),
        spectrum=obj.get("spectrum", "geometric"),
        spectrum_param=float(obj.get("spectrum_param", 0.5)),
        coherence_boost=float(obj.get("coherence_boost", 1.0)),
        noise=float(obj.get("noise", 0.0)),
        loss=obj.get("loss", "quadratic"),
        gamma=float(obj.get("gamma", 0.0)),
        reg=_reg_from_dict(obj.get("reg")),
    )


def _load_problem(config: ExperimentConfig) -> tuple[Problem, Optional[GroundTruth]]:
    section = config.problem
    if "synthetic" in section:
        spec = synthetic_spec_from_dict(section["synthetic"])
        return generate_synthetic(spec, seed=config.data_seed)
    if "data" in section:
        info = section["data"]
        path = info["path"]
        fmt = info.get("format") or ("libsvm" if path.endswith(".libsvm") or path.endswith(".svm") else "csv")
        loss = info.get("loss", "quadratic")
        if fmt == "libsvm":
            dataset = load_libsvm(path, map_labels=(loss == "logistic"))
        else:
            dataset = load_csv(path, label_column=int(info.get("label_column", 0)))
        problem = Problem(
            data=dataset,
            loss_name=loss,
            gamma=float(info.get("gamma", 0.0)),
            reg=_reg_from_dict(info.get("reg")),
        )
        return problem, None
    raise ValueError("problem section must contain 'synthetic' or 'data'")


def _geomean(values: list[float]) -> Optional[float]:
    vals = [v for v in values if v > 0]
    if not vals:
        return None
    return float(math.exp(sum(math.log(v) for v in vals) / len(vals)))


@dataclass
class TrialSummary:
    seed: int
    iterations: int
    converged: bool
    final_grad_norm: float
    geomean_contraction: Optional[float]
    max_epsilon_measured: float
    envelope_pass: Optional[bool]

    def to_dict(self):
        return dataclasses.asdict(self)


def _summarize_trial(
    trace: ConvergenceTrace,
    seed: int,
    bound: BoundParams,
    truth: Optional[GroundTruth],
    envelope_kind: Optional[str],
) -> TrialSummary:
    ratios = trace.contraction_ratios()
    envelope_pass = None
    if envelope_kind is not None and truth is not None:
        report = check_envelope(trace, envelope_kind, bound, truth.kappa)
        envelope_pass = report.passed
    eps_values = [r.epsilon_measured for r in trace.records[1:]] or [0.0]
    return TrialSummary(
        seed=seed,
        iterations=trace.iterations,
        converged=trace.converged,
        final_grad_norm=trace.records[-1].grad_norm,
        geomean_contraction=_geomean(ratios),
        max_epsilon_measured=max(eps_values),
        envelope_pass=envelope_pass,
    )


def run_experiment(config: ExperimentConfig, quiet: bool = False) -> int:
    """Run all trials; write traces and the aggregate; return the exit code."""
    problem, truth = _load_problem(config)
    os.makedirs(config.output, exist_ok=True)

    envelope_kind = None
    if (
        truth is not None
        and problem.loss_name == "quadratic"
        and problem.reg.is_none
        and config.solver.method != "exact_newton"
    ):
        envelope_kind = (
            "sspn_global" if config.solver.method == "sspn" else "global_quadratic"
        )

    w_star = truth.w_star if truth is not None else None
    w0 = np.zeros(problem.d)
    summaries = []
    for i in range(config.trials):
        seed = config.solver.seed + i
        solver = dataclasses.replace(config.solver, seed=seed)
        trace = run(problem, w0, solver, w_star=w_star)
        trace.to_csv(os.path.join(config.output, f"trace_{i:03d}.csv"))
        summaries.append(
            _summarize_trial(trace, seed, config.bound, truth, envelope_kind)
        )

    contractions = [
        s.geomean_contraction for s in summaries if s.geomean_contraction is not None
    ]
    envelope_results = [s.envelope_pass for s in summaries if s.envelope_pass is not None]
    spectral = None
    if truth is not None:
        spectral = SpectralReport(
            epsilon_measured=float(
                np.median([s.max_epsilon_measured for s in summaries])
            ),
            d_eff=truth.d_eff,
            coherence=truth.coherence,
            kappa=truth.kappa,
            s_used=config.solver.s,
        ).to_dict()
    aggregate = {
        "trials": config.trials,
        "method": config.solver.method,
        "scheme": config.solver.scheme,
        "median_geomean_contraction": (
            float(np.median(contractions)) if contractions else None
        ),
        "envelope_pass_fraction": (
            sum(envelope_results) / len(envelope_results) if envelope_results else None
        ),
        "median_final_grad_norm": float(
            np.median([s.final_grad_norm for s in summaries])
        ),
        "spectral": spectral,
        "per_trial": [s.to_dict() for s in summaries],
    }
    with open(os.path.join(config.output, "aggregate.json"), "w") as fh:
        json.dump(aggregate, fh, sort_keys=True, indent=2)
        fh.write("\n")

    if not quiet:
        print(f"{'trial':>5} {'seed':>6} {'iters':>5} {'grad_norm':>12} "
              f"{'contraction':>12} {'envelope':>8}")
        for i, s in enumerate(summaries):
            contraction = "-" if s.geomean_contraction is None else f"{s.geomean_contraction:.4f}"
            env = "-" if s.envelope_pass is None else ("pass" if s.envelope_pass else "FAIL")
            print(f"{i:>5} {s.seed:>6} {s.iterations:>5} {s.final_grad_norm:>12.3e} "
                  f"{contraction:>12} {env:>8}")

    hard_pass = all(s.converged or s.iterations == config.solver.max_outer for s in summaries)
    if envelope_results:
        fraction = sum(envelope_results) / len(envelope_results)
        hard_pass = hard_pass and fraction >= 1.0 - config.bound.delta
        if not quiet:
            print(f"envelope pass fraction: {fraction:.3f} "
                  f"(required >= {1.0 - config.bound.delta:.3f})")
    return 0 if hard_pass else 1
