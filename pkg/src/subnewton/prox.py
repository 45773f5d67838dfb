"""Scaled proximal mapping argmin_z (1/2)||z - v||_Q^2 + r(z).

The map generalizes the Euclidean prox to the metric of an SPD matrix Q.
For r = 0 it is the identity; for diagonal Q with an L1 term it is the
closed-form weighted soft threshold; otherwise it is solved by
accelerated proximal gradient with fixed step 1/lambda_max(Q) and the
strongly-convex momentum constant, stopping when the gradient-map norm
drops below the inner tolerance.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConvergenceError
from .problem import Regularizer


@dataclass(frozen=True)
class ProxInner:
    """Inner-solver budget for the scaled prox (and for the SSPN subproblem)."""

    max_iter: int = 10000
    tol: Optional[float] = None  # None: resolved by the caller (solver uses 1e-10*||g||)


def _is_diagonal(Q: np.ndarray) -> bool:
    return np.count_nonzero(Q - np.diag(np.diagonal(Q))) == 0


def scaled_prox(
    reg: Regularizer,
    Q: np.ndarray,
    v: np.ndarray,
    inner: ProxInner = ProxInner(),
) -> np.ndarray:
    """Evaluate prox_r^Q(v) = argmin_z (1/2)(z-v)'Q(z-v) + r(z)."""
    Q = np.asarray(Q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or v.shape != (Q.shape[0],):
        raise ValueError("Q must be square and v must match its dimension")
    if reg.is_none:
        return v.copy()
    if _is_diagonal(Q):
        q = np.diagonal(Q)
        if np.any(q <= 0):
            raise ValueError("diagonal Q must be positive definite")
        return reg.prox(v, 1.0 / q)

    evals = np.linalg.eigvalsh(Q)
    lip = float(evals[-1])
    mu = float(max(evals[0], 0.0))
    if lip <= 0:
        raise ValueError("Q must be positive definite")
    tol = inner.tol if inner.tol is not None else 1e-12 * max(lip * np.linalg.norm(v), 1.0)

    # APG with constant momentum (sqrt(L)-sqrt(mu))/(sqrt(L)+sqrt(mu));
    # falls back to the 1/k^2 schedule when Q is (numerically) singular.
    theta = None
    if mu > 1e-14 * lip:
        theta = (np.sqrt(lip) - np.sqrt(mu)) / (np.sqrt(lip) + np.sqrt(mu))
    z = v.copy()
    u = z.copy()
    t_k = 1.0
    for _ in range(inner.max_iter):
        grad = Q @ (u - v)
        z_new = reg.prox(u - grad / lip, 1.0 / lip)
        # gradient map at u; zero iff u is the composite minimizer
        gmap_norm = lip * float(np.linalg.norm(u - z_new))
        if theta is not None:
            u = z_new + theta * (z_new - z)
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k**2))
            u = z_new + ((t_k - 1.0) / t_next) * (z_new - z)
            t_k = t_next
        z = z_new
        if gmap_norm <= tol:
            return z
    raise ConvergenceError(
        f"scaled prox did not reach tolerance {tol:.3e} within "
        f"{inner.max_iter} iterations",
        best=z,
    )
