"""SPD linear solves: Cholesky (exact) and conjugate gradient (inexact).

The CG variant enforces the relative energy-norm condition

    ||p' - p||_H <= (eps0 / 2) ||p||_H

rather than a plain residual test.  With x0 = 0 the energy error obeys
||e_k||_H = ||r_k||_{H^-1} <= ||r_k|| / sqrt(lambda_min), and ||x_k||_H
is available exactly from the recurrences (H x_k is accumulated from the
H p_k products CG already computes), so

    ||r_k|| / sqrt(lambda_min) <= (eps0/2) (||x_k||_H - ||r_k||/sqrt(lambda_min))

certifies the condition via ||p||_H >= ||x_k||_H - ||e_k||_H.  When a
lower bound on lambda_min is known (gamma, for ridge-regularized
Hessians) the certificate is rigorous; otherwise the smallest Ritz value
of the CG tridiagonal is used as a surrogate and the report is marked
accordingly.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, LinearSolveError


@dataclass
class SolveReport:
    """Solution plus the certified (or surrogate) relative energy error."""

    solution: np.ndarray
    iterations: int
    relative_energy_error_bound: float
    method: str  # 'exact' or 'cg'
    certified: bool = True


def solve_exact(H, g) -> SolveReport:
    """Solve H x = g by Cholesky factorization.

    Raises LinearSolveError naming the offending leading minor when H is
    not positive definite.
    """
    H = np.asarray(H, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or g.shape != (H.shape[0],):
        raise ValueError("H must be square and g must match its dimension")
    try:
        c, low = scipy.linalg.cho_factor(H, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise LinearSolveError(f"Cholesky factorization failed: {exc}") from exc
    x = scipy.linalg.cho_solve((c, low), g, check_finite=False)
    # machine-precision surrogate: eps * kappa estimated from the factor
    diag = np.abs(np.diag(c))
    kappa_est = float((diag.max() / diag.min()) ** 2) if diag.min() > 0 else np.inf
    bound = np.finfo(np.float64).eps * kappa_est
    return SolveReport(
        solution=x, iterations=0, relative_energy_error_bound=bound, method="exact"
    )


def cg_iteration_budget(kappa: float, epsilon0: float) -> int:
    """Default CG budget ceil((sqrt(kappa) - 1)/2 * log(8/eps0^2)), min 1."""
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    if not 0 < epsilon0 < 1:
        raise ValueError("epsilon0 must lie in (0, 1)")
    q = 0.5 * (math.sqrt(kappa) - 1.0) * math.log(8.0 / epsilon0**2)
    return max(1, math.ceil(q))


def _ritz_lambda_min(alphas, betas) -> float:
    """Smallest eigenvalue of the Lanczos tridiagonal implied by CG."""
    k = len(alphas)
    diag = np.empty(k)
    off = np.empty(max(k - 1, 0))
    for j in range(k):
        diag[j] = 1.0 / alphas[j]
        if j > 0:
            diag[j] += betas[j - 1] / alphas[j - 1]
        if j < k - 1:
            off[j] = math.sqrt(betas[j]) / alphas[j]
    if k == 1:
        return float(diag[0])
    ev = scipy.linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))[0]
    return float(ev[0])


def solve_cg(
    H_apply: Callable[[np.ndarray], np.ndarray],
    g: np.ndarray,
    epsilon0: float,
    max_iter: int,
    lambda_min_lb: Optional[float] = None,
) -> SolveReport:
    """CG from x0 = 0 until the relative energy-norm condition holds.

    Parameters
    ----------
    H_apply : callable
        The SPD operator in factored form (one application per iteration).
    g : ndarray
        Right-hand side.
    epsilon0 : float in (0, 1)
        Target of the energy-norm condition ||p'-p||_H <= (eps0/2)||p||_H.
    max_iter : int
        Iteration budget; exceeding it raises ConvergenceError carrying
        the best iterate and its bound.
    lambda_min_lb : float, optional
        Known lower bound on the smallest eigenvalue of the operator
        (gamma for ridge Hessians).  If omitted, a Ritz-value surrogate
        from the CG tridiagonal is used and the report is not certified.
    """
    if not 0 < epsilon0 < 1:
        raise ValueError("epsilon0 must lie in (0, 1)")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if lambda_min_lb is not None and lambda_min_lb <= 0:
        raise ValueError("lambda_min_lb must be positive when given")
    g = np.asarray(g, dtype=np.float64)
    x = np.zeros_like(g)
    if not np.any(g):
        return SolveReport(x, 0, 0.0, "cg", certified=True)

    r = g.copy()
    p = r.copy()
    hx = np.zeros_like(g)
    rs = float(r @ r)
    alphas: list[float] = []
    betas: list[float] = []
    certified = lambda_min_lb is not None
    bound = np.inf

    for k in range(1, max_iter + 1):
        hp = H_apply(p)
        php = float(p @ hp)
        if php <= 0:
            raise LinearSolveError("operator is not positive definite along CG path")
        alpha = rs / php
        alphas.append(alpha)
        x += alpha * p
        hx += alpha * hp
        r -= alpha * hp
        rs_new = float(r @ r)

        lam = lambda_min_lb if certified else _ritz_lambda_min(alphas, betas)
        err = math.sqrt(rs_new) / math.sqrt(lam)
        xnorm_h = math.sqrt(max(float(x @ hx), 0.0))
        denom = xnorm_h - err
        if denom > 0:
            bound = err / denom
            if bound <= 0.5 * epsilon0:
                return SolveReport(x, k, bound, "cg", certified=certified)
        elif rs_new == 0.0:
            return SolveReport(x, k, 0.0, "cg", certified=certified)

        beta = rs_new / rs
        betas.append(beta)
        p = r + beta * p
        rs = rs_new

    raise ConvergenceError(
        f"CG did not meet the energy-norm condition within {max_iter} iterations "
        f"(best bound {bound:.3e})",
        best=x,
        bound=bound,
    )
