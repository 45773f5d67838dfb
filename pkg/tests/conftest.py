import numpy as np
import pytest

from subnewton.problem import Dataset, Problem
from subnewton.rng import make_rng


def random_spd(rng, d, cond=10.0):
    """Random SPD matrix with eigenvalues log-spaced over [1/cond, 1]."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    evals = np.logspace(-np.log10(cond), 0, d)
    return (Q * evals) @ Q.T


def make_problem(seed=0, n=16, d=4, loss="quadratic", gamma=0.1, reg=None, noise=0.0):
    rng = make_rng(seed)
    X = rng.standard_normal((n, d))
    if loss == "logistic":
        w = rng.standard_normal(d)
        y = np.where(rng.random(n) < 1.0 / (1.0 + np.exp(-X @ w)), 1.0, -1.0)
    else:
        w = rng.standard_normal(d)
        y = X @ w + noise * rng.standard_normal(n)
    kwargs = {} if reg is None else {"reg": reg}
    return Problem(
        data=Dataset(features=X, responses=y), loss_name=loss, gamma=gamma, **kwargs
    )


@pytest.fixture
def rng():
    return make_rng(20240817)
