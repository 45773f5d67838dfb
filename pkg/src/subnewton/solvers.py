"""Newton-type solvers: exact Newton, SSN, GIANT (simulated), and SSPN.

Every outer iteration is fully instrumented: the sketch drawn for the
step is certified against the exact Hessian (spectral epsilon), the
direction is scored against the exact Newton direction (phi ratio), and
communication rounds / CG iterations are counted.  Runs are
deterministic given the config seed; per-iteration sketches use the seed
XOR-ed with the iteration index so iterations stay independent but
reproducible.

GIANT is simulated in-process: workers are disjoint shards of a seeded
uniform partition, each solves its local system against the full
gradient, and the driver averages the directions (summed in ascending
worker order so traces are bit-stable).  Communication is counted, not
transported: four rounds per iteration.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NumericError, SolverError
from .linsolve import cg_iteration_budget, solve_cg, solve_exact
from .problem import (
    IterateState,
    Problem,
    gradient,
    objective,
    scaled_row_matrix,
)
from .prox import ProxInner, scaled_prox
from .rng import derive_seed, make_rng
from .sketch import (
    Sketch,
    draw_sketch,
    permutation_sketch,
    sampling_probabilities,
    spectral_epsilon,
    subsampled_hessian,
)
from .verify import phi

METHODS = ("exact_newton", "ssn", "giant", "sspn")

TRACE_COLUMNS = (
    "iter",
    "grad_norm",
    "objective",
    "delta_norm",
    "epsilon_measured",
    "phi_ratio",
    "comm_rounds",
    "cg_iters",
)


@dataclass(frozen=True)
class InexactSolve:
    """Switch the inner linear solves to CG with the given eps0 target."""

    epsilon0: float

    def __post_init__(self):
        if not 0 < self.epsilon0 < 1:
            raise ValueError("epsilon0 must lie in (0, 1)")


@dataclass(frozen=True)
class SolverConfig:
    """Configuration shared by all solver methods.

    s is the subsample size (for 'giant' the local shard size n/m; 0
    means derive it).  s equal to n selects the deterministic
    full-permutation sketch rather than i.i.d. draws; s greater than n
    keeps sampling with replacement.
    """

    method: str = "ssn"
    scheme: str = "uniform"
    s: int = 0
    m: int = 1
    step_size: float = 1.0
    inexact: Optional[InexactSolve] = None
    max_outer: int = 20
    grad_tol: float = 1e-8
    seed: int = 0
    sspn_inner: ProxInner = field(default_factory=ProxInner)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0 < self.step_size <= 1:
            raise ValueError("step_size must lie in (0, 1]")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True)
class StepInfo:
    """Per-step diagnostics produced by the step operations."""

    epsilon_measured: float
    phi_ratio: float
    cg_iters: int
    comm_delta: int


@dataclass(frozen=True)
class TraceRecord:
    """State of the run after `iteration` steps (iteration 0 = initial)."""

    iteration: int
    grad_norm: float
    objective: float
    delta_norm: Optional[float]
    epsilon_measured: float
    phi_ratio: float
    comm_rounds: int
    cg_iters: int

    def as_row(self) -> list:
        return [
            self.iteration,
            repr(float(self.grad_norm)),
            repr(float(self.objective)),
            "" if self.delta_norm is None else repr(float(self.delta_norm)),
            repr(float(self.epsilon_measured)),
            repr(float(self.phi_ratio)),
            self.comm_rounds,
            self.cg_iters,
        ]


@dataclass
class ConvergenceTrace:
    """Per-iteration record of a solver run."""

    method: str
    records: list[TraceRecord] = field(default_factory=list)
    w_final: Optional[np.ndarray] = None
    converged: bool = False

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    def delta_norms(self) -> list[Optional[float]]:
        return [r.delta_norm for r in self.records]

    def contraction_ratios(self, floor: float = 0.0) -> list[float]:
        """Per-step ratios ||Delta_{t+1}|| / ||Delta_t|| where both are known.

        Steps whose starting error is already at or below `floor` are
        skipped (they sit in numerical noise).
        """
        out = []
        deltas = self.delta_norms()
        for prev, cur in zip(deltas, deltas[1:]):
            if prev is None or cur is None or prev <= floor or prev == 0.0:
                continue
            out.append(cur / prev)
        return out

    def to_csv(self, path=None) -> Optional[str]:
        """Write the trace as CSV; returns the text when no path is given."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in self.records:
            writer.writerow(rec.as_row())
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return None

    def to_json(self) -> str:
        payload = {
            "method": self.method,
            "converged": self.converged,
            "records": [
                {col: getattr(r, attr) for col, attr in zip(TRACE_COLUMNS, (
                    "iteration", "grad_norm", "objective", "delta_norm",
                    "epsilon_measured", "phi_ratio", "comm_rounds", "cg_iters",
                ))}
                for r in self.records
            ],
        }
        return json.dumps(payload, sort_keys=True)


@dataclass(frozen=True)
class WorkerPartition:
    """Seeded uniform permutation of [0, n) split into m contiguous blocks."""

    assignment: np.ndarray
    m: int
    seed: int

    @property
    def n(self) -> int:
        return self.assignment.size

    @property
    def shard_size(self) -> int:
        return self.n // self.m

    def block(self, i: int) -> np.ndarray:
        s = self.shard_size
        return self.assignment[i * s : (i + 1) * s]


def make_partition(n: int, m: int, seed: int) -> WorkerPartition:
    """Partition [0, n) into m equal shards of a seeded uniform permutation."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if n % m != 0:
        raise ValueError(f"m={m} must divide n={n}; trim or pad the dataset")
    perm = make_rng(seed).permutation(n).astype(np.int64)
    return WorkerPartition(assignment=perm, m=m, seed=seed)


# ---------------------------------------------------------------------------
# internals shared by the steps
# ---------------------------------------------------------------------------


def _exact_hessian_from_rows(A: np.ndarray, gamma: float, n: int) -> np.ndarray:
    H = A.T @ A / n
    H[np.diag_indices_from(H)] += gamma
    return 0.5 * (H + H.T)


def _solve_system(A_rows, sketch, gamma, n, H_tilde, g, config):
    """Solve H_tilde p = g exactly or by CG on the factored operator."""
    if config.inexact is None:
        return solve_exact(H_tilde, g).solution, 0
    C = sketch.weights[:, None] * A_rows[sketch.indices]

    def apply(v):
        return C.T @ (C @ v) / n + gamma * v

    evals = np.linalg.eigvalsh(H_tilde)
    kappa = float(evals[-1] / evals[0]) if evals[0] > 0 else np.inf
    budget = cg_iteration_budget(min(kappa, 1e16), config.inexact.epsilon0)
    max_iter = max(budget, g.size + 5)
    lam_lb = gamma if gamma > 0 else None
    report = solve_cg(apply, g, config.inexact.epsilon0, max_iter, lambda_min_lb=lam_lb)
    return report.solution, report.iterations


def _direction_quality(H, g, p):
    """phi(p)/phi(p*) in (0, 1]; 1.0 when the gradient is negligible."""
    p_star = solve_exact(H, g).solution
    phi_exact = phi(H, g, p_star)
    if abs(phi_exact) < 1e-300:
        return 1.0
    return float(phi(H, g, p) / phi_exact)


def _draw_step_sketch(A, problem, config, iteration) -> Sketch:
    n = problem.n
    seed_t = derive_seed(config.seed, iteration)
    if config.s == n:
        return permutation_sketch(n, scheme=config.scheme, seed=seed_t)
    probs = sampling_probabilities(A, config.scheme, problem.gamma)
    return draw_sketch(probs, config.s, seed_t, scheme=config.scheme)


def _finish_step(problem, state, config, w_next, info):
    if not np.all(np.isfinite(w_next)):
        raise NumericError(f"non-finite iterate at iteration {state.iteration + 1}")
    g_next = gradient(problem, w_next)
    return IterateState(w=w_next, g=g_next, iteration=state.iteration + 1), info


# ---------------------------------------------------------------------------
# step operations
# ---------------------------------------------------------------------------


def exact_newton_step(problem: Problem, state: IterateState, config: SolverConfig):
    """One full Newton step w - alpha * H^{-1} g."""
    A = scaled_row_matrix(problem, state.w)
    H = _exact_hessian_from_rows(A, problem.gamma, problem.n)
    p = solve_exact(H, state.g).solution
    w_next = state.w - config.step_size * p
    info = StepInfo(epsilon_measured=0.0, phi_ratio=1.0, cg_iters=0, comm_delta=0)
    return _finish_step(problem, state, config, w_next, info)


def ssn_step(problem: Problem, state: IterateState, config: SolverConfig):
    """One sub-sampled Newton step: sketch, certify, solve, update."""
    if config.s < 1:
        raise ValueError("config.s must be at least 1 for SSN")
    A = scaled_row_matrix(problem, state.w)
    H = _exact_hessian_from_rows(A, problem.gamma, problem.n)
    sketch = _draw_step_sketch(A, problem, config, state.iteration)
    H_tilde = subsampled_hessian(A, sketch, problem.gamma, problem.n)
    eps = spectral_epsilon(H, H_tilde)
    p, cg_iters = _solve_system(A, sketch, problem.gamma, problem.n, H_tilde, state.g, config)
    ratio = _direction_quality(H, state.g, p)
    w_next = state.w - config.step_size * p
    info = StepInfo(epsilon_measured=eps, phi_ratio=ratio, cg_iters=cg_iters, comm_delta=0)
    return _finish_step(problem, state, config, w_next, info)


def giant_step(
    problem: Problem,
    state: IterateState,
    partition: WorkerPartition,
    config: SolverConfig,
):
    """One simulated GIANT iteration: local solves, averaged direction.

    The recorded epsilon is the max over workers (the simultaneous
    sandwich); comm_delta is the four communication rounds of the
    broadcast/aggregate pattern.
    """
    n = problem.n
    if partition.assignment.min() < 0 or partition.assignment.max() >= n:
        raise ValueError("partition indices out of range for the dataset")
    s = partition.shard_size
    A = scaled_row_matrix(problem, state.w)
    H = _exact_hessian_from_rows(A, problem.gamma, n)
    scale = np.sqrt(n / s)
    eps_max = 0.0
    cg_total = 0
    p_sum = np.zeros(problem.d)
    for i in range(partition.m):
        shard = partition.block(i)
        sketch = Sketch(
            indices=shard,
            weights=np.full(s, scale),
            scheme="uniform",
            seed=partition.seed,
        )
        H_i = subsampled_hessian(A, sketch, problem.gamma, n)
        eps_max = max(eps_max, spectral_epsilon(H, H_i))
        p_i, cg_i = _solve_system(A, sketch, problem.gamma, n, H_i, state.g, config)
        cg_total += cg_i
        p_sum += p_i
    p_avg = p_sum / partition.m
    ratio = _direction_quality(H, state.g, p_avg)
    w_next = state.w - config.step_size * p_avg
    info = StepInfo(
        epsilon_measured=eps_max, phi_ratio=ratio, cg_iters=cg_total, comm_delta=4
    )
    return _finish_step(problem, state, config, w_next, info)


def sspn_step(problem: Problem, state: IterateState, config: SolverConfig):
    """One sub-sampled proximal Newton step.

    Computes the smooth direction p from the sketched system, then maps
    w - p through the prox scaled by the sketched Hessian.  With r = 0
    this reduces exactly to ssn_step (same seed, same sketch).
    """
    if config.s < 1:
        raise ValueError("config.s must be at least 1 for SSPN")
    A = scaled_row_matrix(problem, state.w)
    H = _exact_hessian_from_rows(A, problem.gamma, problem.n)
    sketch = _draw_step_sketch(A, problem, config, state.iteration)
    H_tilde = subsampled_hessian(A, sketch, problem.gamma, problem.n)
    eps = spectral_epsilon(H, H_tilde)
    p, cg_iters = _solve_system(A, sketch, problem.gamma, problem.n, H_tilde, state.g, config)
    ratio = _direction_quality(H, state.g, p)
    inner = config.sspn_inner
    if inner.tol is None:
        inner = ProxInner(
            max_iter=inner.max_iter,
            tol=1e-10 * max(float(np.linalg.norm(state.g)), 1e-30),
        )
    w_next = scaled_prox(problem.reg, H_tilde, state.w - config.step_size * p, inner)
    info = StepInfo(epsilon_measured=eps, phi_ratio=ratio, cg_iters=cg_iters, comm_delta=0)
    return _finish_step(problem, state, config, w_next, info)


# ---------------------------------------------------------------------------
# outer loop
# ---------------------------------------------------------------------------


def _effective_config(problem: Problem, config: SolverConfig) -> SolverConfig:
    """Resolve derived fields and validate method-specific invariants."""
    n = problem.n
    if config.method == "giant":
        if n % config.m != 0:
            raise ValueError(f"m={config.m} must divide n={n}")
        shard = n // config.m
        if config.s not in (0, shard):
            raise ValueError(f"GIANT requires m*s = n; expected s={shard}, got {config.s}")
        return config
    if config.method in ("ssn", "sspn") and config.s < 1:
        raise ValueError(f"config.s must be at least 1 for {config.method}")
    return config


def run(
    problem: Problem,
    w0,
    config: SolverConfig,
    w_star=None,
) -> ConvergenceTrace:
    """Iterate the configured method until grad_tol or max_outer.

    When w_star is supplied, per-iteration error norms are recorded so
    the convergence envelopes can be checked downstream.  Identical
    (problem, w0, config, w_star) reproduce identical traces bit for bit.
    """
    config = _effective_config(problem, config)
    w0 = np.asarray(w0, dtype=np.float64)
    if w0.shape != (problem.d,):
        raise ValueError(f"w0 must have shape ({problem.d},)")
    if w_star is not None:
        w_star = np.asarray(w_star, dtype=np.float64)

    state = IterateState(w=w0.copy(), g=gradient(problem, w0), iteration=0)
    partition = None
    if config.method == "giant":
        partition = make_partition(problem.n, config.m, config.seed)

    trace = ConvergenceTrace(method=config.method)
    comm_rounds = 0

    def delta(w):
        return None if w_star is None else float(np.linalg.norm(w - w_star))

    trace.records.append(
        TraceRecord(
            iteration=0,
            grad_norm=float(np.linalg.norm(state.g)),
            objective=objective(problem, state.w),
            delta_norm=delta(state.w),
            epsilon_measured=0.0,
            phi_ratio=1.0,
            comm_rounds=0,
            cg_iters=0,
        )
    )

    while (
        state.iteration < config.max_outer
        and float(np.linalg.norm(state.g)) > config.grad_tol
    ):
        try:
            if config.method == "exact_newton":
                state, info = exact_newton_step(problem, state, config)
            elif config.method == "ssn":
                state, info = ssn_step(problem, state, config)
            elif config.method == "giant":
                state, info = giant_step(problem, state, partition, config)
            else:
                state, info = sspn_step(problem, state, config)
        except Exception as exc:
            trace.w_final = state.w
            raise SolverError(
                f"step {state.iteration + 1} failed: {exc}", trace=trace
            ) from exc
        comm_rounds += info.comm_delta
        trace.records.append(
            TraceRecord(
                iteration=state.iteration,
                grad_norm=float(np.linalg.norm(state.g)),
                objective=objective(problem, state.w),
                delta_norm=delta(state.w),
                epsilon_measured=info.epsilon_measured,
                phi_ratio=info.phi_ratio,
                comm_rounds=comm_rounds,
                cg_iters=info.cg_iters,
            )
        )

    trace.w_final = state.w
    trace.converged = float(np.linalg.norm(state.g)) <= config.grad_tol
    return trace
