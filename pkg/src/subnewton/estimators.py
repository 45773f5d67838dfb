"""scikit-learn compatible wrappers around the solver suite.

These estimators make the sub-sampled Newton methods usable inside
pipelines, grid searches, and anything else that speaks fit/predict +
get_params.  The regressor minimizes ridge (optionally lasso/elastic
net) least squares; the classifier minimizes L2-regularized logistic
loss over two classes.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.exceptions import NotFittedError

from .problem import Dataset, Problem, Regularizer, l1
from .sketch import (
    BoundParams,
    effective_dimension,
    ridge_coherence,
    sample_size,
)
from .solvers import InexactSolve, SolverConfig, run


def check_features(X) -> np.ndarray:
    """Validate a feature matrix: 2-d, nonempty, finite float64."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"X must be a nonempty 2-d array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite entries")
    return X


def check_targets(X, y) -> np.ndarray:
    """Validate a response vector against the feature matrix."""
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise ValueError(
            f"X and y have inconsistent lengths: {X.shape[0]} vs {y.shape[0]}"
        )
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite entries")
    return y


class _NewtonBase(BaseEstimator):
    def _resolve_s(self, problem: Problem, method: str) -> int:
        if self.s != "auto":
            return int(self.s)
        if method in ("exact_newton", "giant"):
            return 0  # unused / derived as n/m
        A = problem.data.features  # curvature rows at w=0 are a scaling of X
        d_eff = effective_dimension(A, problem.gamma, problem.n)
        mu = ridge_coherence(A, problem.gamma, problem.n)
        bound = BoundParams(epsilon=0.25, delta=0.1)
        s = sample_size(bound, d_eff, mu, self.scheme, self.m, "ssn")
        return min(s, problem.n)

    def _fit_problem(self, problem: Problem, method: str):
        inexact = None if self.epsilon0 is None else InexactSolve(self.epsilon0)
        config = SolverConfig(
            method=method,
            scheme=self.scheme,
            s=self._resolve_s(problem, method),
            m=self.m,
            inexact=inexact,
            max_outer=self.max_outer,
            grad_tol=self.tol,
            seed=self.seed,
        )
        trace = run(problem, np.zeros(problem.d), config)
        self.coef_ = trace.w_final
        self.trace_ = trace
        self.n_iter_ = trace.iterations
        return self

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError(
                f"this {type(self).__name__} instance is not fitted yet"
            )


class SubsampledNewtonRegressor(_NewtonBase, RegressorMixin):
    """Ridge (plus optional L1) least squares via sub-sampled Newton.

    Parameters
    ----------
    gamma : float
        L2 strength of the smooth objective.
    lam : float
        L1 strength; 0 keeps the problem smooth.  Nonzero lam switches
        the method to the proximal variant.
    method : str
        'exact_newton', 'ssn', 'giant', or 'sspn'.
    scheme : str
        Row sampling scheme for the sketched Hessian.
    s : int or 'auto'
        Subsample size; 'auto' evaluates the certified bound at
        eps=0.25, delta=0.1 (capped at n).
    """

    def __init__(
        self,
        gamma=1e-3,
        lam=0.0,
        method="ssn",
        scheme="uniform",
        s="auto",
        m=1,
        epsilon0=None,
        max_outer=30,
        tol=1e-8,
        seed=0,
    ):
        self.gamma = gamma
        self.lam = lam
        self.method = method
        self.scheme = scheme
        self.s = s
        self.m = m
        self.epsilon0 = epsilon0
        self.max_outer = max_outer
        self.tol = tol
        self.seed = seed

    def fit(self, X, y):
        X = check_features(X)
        y = check_targets(X, y)
        reg = l1(self.lam) if self.lam > 0 else Regularizer()
        method = self.method
        if self.lam > 0 and method in ("ssn", "exact_newton"):
            method = "sspn"
        problem = Problem(
            data=Dataset(features=X, responses=y),
            loss_name="quadratic",
            gamma=self.gamma,
            reg=reg,
        )
        return self._fit_problem(problem, method)

    def predict(self, X):
        self._check_fitted()
        X = check_features(X)
        return X @ self.coef_


class SubsampledNewtonClassifier(_NewtonBase, ClassifierMixin):
    """Two-class L2-regularized logistic regression via sub-sampled Newton."""

    def __init__(
        self,
        gamma=1e-3,
        method="ssn",
        scheme="uniform",
        s="auto",
        m=1,
        epsilon0=None,
        max_outer=50,
        tol=1e-8,
        seed=0,
    ):
        self.gamma = gamma
        self.method = method
        self.scheme = scheme
        self.s = s
        self.m = m
        self.epsilon0 = epsilon0
        self.max_outer = max_outer
        self.tol = tol
        self.seed = seed

    def fit(self, X, y):
        X = check_features(X)
        y = np.asarray(y).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y have inconsistent lengths")
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise ValueError(
                f"expected exactly 2 classes, got {self.classes_.size}"
            )
        signs = np.where(y == self.classes_[1], 1.0, -1.0)
        problem = Problem(
            data=Dataset(features=X, responses=signs),
            loss_name="logistic",
            gamma=self.gamma,
        )
        return self._fit_problem(problem, self.method)

    def decision_function(self, X):
        self._check_fitted()
        X = check_features(X)
        return X @ self.coef_

    def predict(self, X):
        scores = self.decision_function(X)
        return np.where(scores >= 0, self.classes_[1], self.classes_[0])

    def predict_proba(self, X):
        scores = self.decision_function(X)
        p1 = 1.0 / (1.0 + np.exp(-scores))
        return np.column_stack([1.0 - p1, p1])
