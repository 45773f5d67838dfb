import json
import math

import numpy as np
import pytest

from subnewton.linsolve import solve_exact
from subnewton.problem import Regularizer, l1
from subnewton.prox import ProxInner
from subnewton.rng import make_rng
from subnewton.sketch import (
    BoundParams,
    draw_sketch,
    spectral_epsilon,
    subsampled_hessian,
)
from subnewton.solvers import ConvergenceTrace, SolverConfig, TraceRecord, run
from subnewton.verify import (
    check_direction,
    check_envelope,
    check_prox_properties,
    check_step_recursion,
    estimate_lipschitz,
    phi,
)

from conftest import make_problem, random_spd


def naive_phi(H, g, p):
    """Extended-precision term-by-term evaluation."""
    d = len(g)
    quad = math.fsum(
        float(p[i]) * float(H[i, j]) * float(p[j]) for i in range(d) for j in range(d)
    )
    lin = math.fsum(float(p[i]) * float(g[i]) for i in range(d))
    return quad - 2.0 * lin


def synthetic_trace(deltas):
    records = [
        TraceRecord(
            iteration=t,
            grad_norm=1.0,
            objective=1.0,
            delta_norm=d,
            epsilon_measured=0.0,
            phi_ratio=1.0,
            comm_rounds=0,
            cg_iters=0,
        )
        for t, d in enumerate(deltas)
    ]
    return ConvergenceTrace(method="ssn", records=records)


# ---------------------------------------------------------------------------
# phi
# ---------------------------------------------------------------------------


def test_phi_zero_direction(rng):
    H = random_spd(rng, 3)
    assert phi(H, rng.standard_normal(3), np.zeros(3)) == 0.0


def test_phi_at_newton_direction_identity(rng):
    H = random_spd(rng, 5, cond=40)
    g = rng.standard_normal(5)
    p_star = solve_exact(H, g).solution
    expected = -float(g @ p_star)  # -g'H^{-1}g
    assert phi(H, g, p_star) == pytest.approx(expected, rel=1e-10)


def test_phi_matches_naive_evaluation(rng):
    H = random_spd(rng, 4)
    g = rng.standard_normal(4)
    p = rng.standard_normal(4)
    assert phi(H, g, p) == pytest.approx(naive_phi(H, g, p), abs=1e-12)


def test_phi_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        phi(np.eye(3), np.zeros(3), np.zeros(2))


# ---------------------------------------------------------------------------
# direction quality
# ---------------------------------------------------------------------------


def test_exact_direction_passes_alpha_zero(rng):
    H = random_spd(rng, 4)
    g = rng.standard_normal(4)
    p_star = solve_exact(H, g).solution
    q = check_direction(H, g, p_star, alpha=0.0)
    assert q.passed
    assert q.phi_approx == pytest.approx(q.phi_exact, rel=1e-9)


def test_doubled_direction_fails_small_alpha(rng):
    H = random_spd(rng, 4)
    g = rng.standard_normal(4)
    p_star = solve_exact(H, g).solution
    q = check_direction(H, g, 2.0 * p_star, alpha=0.5)
    # phi(2 p*) = 4 g'H^{-1}g - 4 g'H^{-1}g = 0, which breaks the sandwich
    assert q.phi_approx == pytest.approx(0.0, abs=1e-9 * abs(q.phi_exact))
    assert not q.passed


def test_sketched_direction_sandwich_holds_at_measured_epsilon():
    # the spectral certificate implies the direction-quality sandwich:
    # exercised end to end on 200 seeded instances
    rng = make_rng(808)
    n, d, gamma = 16, 4, 0.2
    failures = 0
    for seed in range(200):
        A = rng.standard_normal((n, d))
        g = rng.standard_normal(d)
        H = A.T @ A / n + gamma * np.eye(d)
        sketch = draw_sketch(np.full(n, 1 / n), 8, seed=seed)
        H_tilde = subsampled_hessian(A, sketch, gamma, n)
        eps = spectral_epsilon(H, H_tilde)
        if eps >= 1.0:
            continue  # sandwich vacuous; the lemma presumes eps < 1
        p = solve_exact(H_tilde, g).solution
        alpha = eps / (1.0 - eps)
        if not check_direction(H, g, p, alpha).passed:
            failures += 1
    assert failures == 0


# ---------------------------------------------------------------------------
# step recursion
# ---------------------------------------------------------------------------


def test_step_recursion_zero_next_error(rng):
    H = random_spd(rng, 4)
    assert check_step_recursion(H, rng.standard_normal(4), np.zeros(4), 0.3, 0.0)


def test_step_recursion_adversarial_blowup(rng):
    H = np.eye(4)
    d_t = rng.standard_normal(4)
    assert not check_step_recursion(H, d_t, 10.0 * d_t, alpha=0.1, L=0.0)


def test_step_recursion_holds_on_instrumented_runs():
    p = make_problem(seed=61, n=128, d=8, gamma=0.3, noise=0.1)
    cfg_star = SolverConfig(method="exact_newton", max_outer=50, grad_tol=1e-13)
    w_star = run(p, np.zeros(8), cfg_star).w_final
    from subnewton.problem import exact_hessian

    H = exact_hessian(p, np.zeros(8))
    ok = 0
    for seed in range(50):
        trace = run(
            p,
            np.zeros(8),
            SolverConfig(method="ssn", s=96, max_outer=1, grad_tol=-1, seed=seed),
            w_star=w_star,
        )
        eps = trace.records[1].epsilon_measured
        if eps >= 1.0:
            continue
        alpha = eps / (1.0 - eps)
        if alpha >= 1.0:
            continue
        w1 = trace.w_final
        if check_step_recursion(H, -w_star, w1 - w_star, alpha, L=0.0):
            ok += 1
    assert ok >= 45  # quadratic loss: the recursion is a theorem, not luck


def test_step_recursion_validation(rng):
    with pytest.raises(ValueError):
        check_step_recursion(np.eye(2), np.ones(2), np.ones(2), alpha=1.0, L=0.0)


# ---------------------------------------------------------------------------
# envelopes
# ---------------------------------------------------------------------------


def test_envelope_exact_newton_trivial():
    trace = synthetic_trace([1.0, 0.0, 0.0])
    rep = check_envelope(trace, "global_quadratic", BoundParams(0.01, 0.1), kappa=100.0)
    assert rep.passed and rep.first_failure_iter is None


def test_envelope_doubling_fails_at_one():
    trace = synthetic_trace([1.0, 2.0, 4.0])
    rep = check_envelope(trace, "global_quadratic", BoundParams(0.5, 0.1), kappa=1.0)
    assert not rep.passed
    assert rep.first_failure_iter == 1


def test_envelope_local_basin_gating():
    bound = BoundParams(0.25, 0.1, lipschitz_L=2.0)
    # sigma_min/(2L) = 0.25: the first step starts outside the basin
    trace = synthetic_trace([1.0, 0.9, 0.2, 0.07])
    rep = check_envelope(trace, "local_nonquadratic", bound, kappa=4.0, sigma_min=1.0)
    assert rep.details["skipped_outside_basin"] >= 1


def test_envelope_requires_delta_norms():
    trace = ConvergenceTrace(
        method="ssn",
        records=[
            TraceRecord(0, 1.0, 1.0, None, 0.0, 1.0, 0, 0),
            TraceRecord(1, 0.5, 0.5, None, 0.0, 1.0, 0, 0),
        ],
    )
    with pytest.raises(ValueError):
        check_envelope(trace, "global_quadratic", BoundParams(0.5, 0.1), kappa=1.0)


def test_envelope_report_json_shape():
    rep = check_envelope(
        synthetic_trace([1.0, 0.1]), "global_quadratic", BoundParams(0.5, 0.1), 4.0
    )
    payload = json.loads(rep.to_json())
    assert set(payload) == {"check", "pass", "first_failure_iter", "details"}


def test_envelope_on_ssn_quadratic_reference():
    p = make_problem(seed=62, n=256, d=8, gamma=0.2, noise=0.1)
    w_star = run(
        p, np.zeros(8), SolverConfig(method="exact_newton", max_outer=5, grad_tol=1e-13)
    ).w_final
    bound = BoundParams(epsilon=0.25, delta=0.1)
    passes = 0
    for seed in range(20):
        trace = run(
            p,
            np.zeros(8),
            SolverConfig(method="ssn", s=256, max_outer=5, grad_tol=-1, seed=seed),
            w_star=w_star,
        )
        passes += check_envelope(trace, "global_quadratic", bound, kappa=50.0).passed
    assert passes >= 18


# ---------------------------------------------------------------------------
# prox properties
# ---------------------------------------------------------------------------


def test_prox_property_identity_map(rng):
    Q = random_spd(rng, 3)
    w1, w2 = rng.standard_normal(3), rng.standard_normal(3)
    rep = check_prox_properties(Regularizer(), Q, w1, w2)
    assert rep.passed
    assert rep.lhs == pytest.approx(rep.rhs, rel=1e-12)


def test_prox_property_soft_threshold_euclidean(rng):
    for _ in range(20):
        w1, w2 = rng.standard_normal(4), rng.standard_normal(4)
        rep = check_prox_properties(l1(0.5), np.eye(4), w1, w2)
        assert rep.passed


def test_prox_property_monte_carlo_scaled():
    rng = make_rng(63)
    Q = random_spd(rng, 4, cond=30)
    inner = ProxInner(max_iter=100000, tol=1e-12)
    for _ in range(100):
        w1, w2 = rng.standard_normal(4), rng.standard_normal(4)
        assert check_prox_properties(l1(0.3), Q, w1, w2, inner).passed


# ---------------------------------------------------------------------------
# Lipschitz estimation
# ---------------------------------------------------------------------------


def test_lipschitz_estimate_zero_for_quadratic():
    p = make_problem(seed=64, n=32, d=4, gamma=0.1)
    assert estimate_lipschitz(p, np.zeros(4), radius=1.0, pairs=20) == 0.0


def test_lipschitz_estimate_positive_for_logistic():
    p = make_problem(seed=65, n=32, d=4, loss="logistic", gamma=0.1)
    L = estimate_lipschitz(p, np.zeros(4), radius=0.5, pairs=20)
    assert L > 0
