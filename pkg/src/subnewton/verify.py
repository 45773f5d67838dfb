"""Executable certificate checks for the solver guarantees.

The quadratic auxiliary function phi(p) = p'Hp - 2p'g scores a candidate
Newton direction: its minimizer is the exact direction p* = H^{-1}g with
phi(p*) = -g'H^{-1}g, and a direction solved from an eps-spectral
approximation of H satisfies phi(p) <= (1 - alpha^2) phi(p*) with
alpha = eps/(1-eps) (alpha = eps^2/(1-eps) for averaged distributed
directions).  The step-recursion check and the convergence envelopes
turn the error-recursion inequality and the global/local rate statements
into per-iteration pass/fail evaluations of recorded traces.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linsolve import solve_exact
from .problem import Problem, Regularizer, exact_hessian
from .prox import ProxInner, scaled_prox
from .rng import make_rng
from .sketch import BoundParams


def phi(H, g, p) -> float:
    """Direction-quality objective p'Hp - 2 p'g (minimized by H^{-1}g)."""
    H = np.asarray(H, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if H.shape != (g.size, g.size) or p.shape != g.shape:
        raise ValueError("dimension mismatch between H, g, p")
    return float(p @ (H @ p) - 2.0 * (p @ g))


@dataclass
class DirectionQuality:
    """phi values of the exact and candidate directions plus the verdict."""

    phi_exact: float
    phi_approx: float
    alpha_bound: float
    passed: bool


def check_direction(H, g, p_candidate, alpha: float) -> DirectionQuality:
    """Check phi(p_candidate) <= (1 - alpha^2) * min_p phi(p).

    alpha is the certified direction-error level: eps/(1-eps) for a
    single sketched solve, eps^2/(1-eps) for an averaged (distributed)
    direction.  A failed check is a result, not an error.
    """
    p_star = solve_exact(H, g).solution
    phi_exact = phi(H, g, p_star)
    phi_approx = phi(H, g, p_candidate)
    # both values are <= 0; allow relative slack for the exact-arithmetic edge
    slack = 1e-9 * max(abs(phi_exact), 1.0)
    passed = phi_approx <= (1.0 - alpha**2) * phi_exact + slack
    return DirectionQuality(
        phi_exact=phi_exact,
        phi_approx=phi_approx,
        alpha_bound=float(alpha),
        passed=bool(passed),
    )


def check_step_recursion(H_t, delta_t, delta_next, alpha: float, L: float) -> bool:
    """Evaluate the one-step error recursion

        Delta_{t+1}' H Delta_{t+1}
            <= L ||Delta_t||^2 ||Delta_{t+1}|| + alpha^2/(1-alpha^2) Delta_t' H Delta_t

    numerically, with slack 1e-9 on the comparison.
    """
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    if L < 0:
        raise ValueError("L must be nonnegative")
    H_t = np.asarray(H_t, dtype=np.float64)
    d_t = np.asarray(delta_t, dtype=np.float64)
    d_n = np.asarray(delta_next, dtype=np.float64)
    lhs = float(d_n @ (H_t @ d_n))
    amp = alpha**2 / (1.0 - alpha**2)
    rhs = L * float(d_t @ d_t) * float(np.linalg.norm(d_n)) + amp * float(
        d_t @ (H_t @ d_t)
    )
    scale = max(abs(lhs), abs(rhs), 1.0)
    return lhs <= rhs + 1e-9 * scale


ENVELOPE_KINDS = ("global_quadratic", "local_nonquadratic", "sspn_global", "sspn_local")


@dataclass
class EnvelopeReport:
    """Per-iteration envelope verdicts for a recorded trace."""

    check: str
    passed: bool
    first_failure_iter: Optional[int]
    details: dict = field(default_factory=dict)
    per_iteration: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "check": self.check,
                "pass": self.passed,
                "first_failure_iter": self.first_failure_iter,
                "details": self.details,
            },
            sort_keys=True,
        )


def check_envelope(
    trace,
    kind: str,
    bound: BoundParams,
    kappa: float,
    sigma_min: Optional[float] = None,
) -> EnvelopeReport:
    """Check a recorded trace against a convergence envelope.

    'global_quadratic' (and 'sspn_global') demand
    ||Delta_t|| <= eps^t sqrt(kappa) ||Delta_0|| at every iteration;
    'local_nonquadratic' (and 'sspn_local') demand the one-step bound
    ||Delta_{t+1}|| <= eps sqrt(kappa) ||Delta_t|| + (L/sigma_min) ||Delta_t||^2
    for iterations inside the basin ||Delta_t|| <= sigma_min / (2L)
    (steps outside the basin are skipped and noted).
    """
    if kind not in ENVELOPE_KINDS:
        raise ValueError(f"kind must be one of {ENVELOPE_KINDS}, got {kind!r}")
    deltas = [r.delta_norm for r in trace.records]
    if len(deltas) < 2 or any(d is None for d in deltas):
        raise ValueError("trace must carry delta_norm entries (w_star known)")
    eps = bound.epsilon
    per = []
    skipped = 0
    if kind in ("global_quadratic", "sspn_global"):
        d0 = deltas[0]
        for t, d_t in enumerate(deltas):
            allowed = eps**t * np.sqrt(kappa) * d0
            per.append(bool(d_t <= allowed + 1e-12 * max(d0, 1.0)))
    else:
        L = bound.lipschitz_L
        if L is None:
            raise ValueError("local envelope needs bound.lipschitz_L")
        if sigma_min is None or sigma_min <= 0:
            raise ValueError("local envelope needs sigma_min > 0")
        per.append(True)  # iteration 0 has no predecessor
        basin = np.inf if L == 0 else sigma_min / (2.0 * L)
        for d_t, d_next in zip(deltas, deltas[1:]):
            if d_t > basin:
                per.append(True)
                skipped += 1
                continue
            allowed = eps * np.sqrt(kappa) * d_t + (L / sigma_min) * d_t**2
            per.append(bool(d_next <= allowed + 1e-12 * max(d_t, 1.0)))
    failures = [t for t, ok in enumerate(per) if not ok]
    return EnvelopeReport(
        check=kind,
        passed=not failures,
        first_failure_iter=failures[0] if failures else None,
        details={
            "epsilon": eps,
            "kappa": float(kappa),
            "iterations": len(deltas) - 1,
            "skipped_outside_basin": skipped,
        },
        per_iteration=per,
    )


@dataclass
class ProxPropertyReport:
    """Nonexpansiveness verdict for one pair of points."""

    check: str
    passed: bool
    lhs: float
    rhs: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "check": self.check,
                "pass": self.passed,
                "first_failure_iter": None,
                "details": {"lhs": self.lhs, "rhs": self.rhs},
            },
            sort_keys=True,
        )


def check_prox_properties(
    reg: Regularizer,
    Q,
    w1,
    w2,
    inner: ProxInner = ProxInner(),
    slack: float = 1e-8,
) -> ProxPropertyReport:
    """Verify ||prox(w1) - prox(w2)||_Q <= ||w1 - w2||_Q (+ inner-solve slack)."""
    Q = np.asarray(Q, dtype=np.float64)
    w1 = np.asarray(w1, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    p1 = scaled_prox(reg, Q, w1, inner)
    p2 = scaled_prox(reg, Q, w2, inner)

    def qnorm(v):
        return float(np.sqrt(max(v @ (Q @ v), 0.0)))

    lhs = qnorm(p1 - p2)
    rhs = qnorm(w1 - w2)
    return ProxPropertyReport(
        check="prox_nonexpansive", passed=lhs <= rhs + slack, lhs=lhs, rhs=rhs
    )


def estimate_lipschitz(
    problem: Problem,
    center,
    radius: float,
    seed: int = 0,
    pairs: int = 100,
) -> float:
    """Sampled estimate of the Hessian Lipschitz constant.

    Takes twice the maximum of ||H(w) - H(w')|| / ||w - w'|| over random
    pairs within `radius` of `center`.  Advisory: checks that rely on an
    estimated L are only as good as the sampling.
    """
    center = np.asarray(center, dtype=np.float64)
    rng = make_rng(seed)
    best = 0.0
    for _ in range(pairs):
        u = rng.standard_normal(problem.d)
        v = rng.standard_normal(problem.d)
        w1 = center + radius * u / max(np.linalg.norm(u), 1e-30)
        w2 = center + radius * v / max(np.linalg.norm(v), 1e-30)
        gap = float(np.linalg.norm(w1 - w2))
        if gap < 1e-12:
            continue
        diff = np.linalg.norm(
            exact_hessian(problem, w1) - exact_hessian(problem, w2), ord=2
        )
        best = max(best, float(diff) / gap)
    return 2.0 * best
