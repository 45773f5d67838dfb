"""Problem definition: data, losses, regularizers, derivatives.

The smooth objective is

    F(w) = (1/n) sum_j l(x_j' w; y_j) + (gamma/2) ||w||^2

optionally extended with a separable non-smooth term r(w) (L1 or the L1
part of an elastic net; the quadratic part of an elastic net belongs in
gamma).  The Hessian of F factors as (1/n) A' A + gamma I where row j of
A is sqrt(l''(x_j' w; y_j)) x_j; everything downstream (sketching, the
Newton-type solvers, the certificates) is built on that factorization.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


class QuadraticLoss:
    """Squared error l(z; y) = (z - y)^2 / 2."""

    name = "quadratic"

    def value(self, z, y):
        return 0.5 * (z - y) ** 2

    def d1(self, z, y):
        return z - y

    def d2(self, z, y):
        return np.ones_like(z)


class LogisticLoss:
    """Logistic loss l(z; y) = log(1 + exp(-y z)) for labels y in {-1, +1}.

    Evaluated via log1p/exp branching on the sign of y*z so that neither
    branch overflows.
    """

    name = "logistic"

    def value(self, z, y):
        t = y * z
        # log(1 + exp(-t)) = max(-t, 0) + log1p(exp(-|t|))
        return np.maximum(-t, 0.0) + np.log1p(np.exp(-np.abs(t)))

    def d1(self, z, y):
        # -y * sigmoid(-y z), written to avoid exp overflow for large |t|
        t = y * z
        out = np.empty_like(t)
        pos = t >= 0
        e = np.exp(-t[pos])
        out[pos] = e / (1.0 + e)
        e = np.exp(t[~pos])
        out[~pos] = 1.0 / (1.0 + e)
        return -y * out

    def d2(self, z, y):
        # sigmoid(t) * sigmoid(-t), symmetric in the sign of t
        t = np.abs(y * z)
        e = np.exp(-t)
        s = e / (1.0 + e)
        return s * (1.0 - s)


_LOSSES = {"quadratic": QuadraticLoss(), "logistic": LogisticLoss()}


def get_loss(name):
    """Look up a loss by name ('quadratic' or 'logistic')."""
    try:
        return _LOSSES[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; expected one of {sorted(_LOSSES)}")


# ---------------------------------------------------------------------------
# regularizers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Regularizer:
    """Separable non-smooth term r(w).

    kind 'none' is r = 0; 'l1' is lam * ||w||_1; 'elastic_net_extra' is the
    non-smooth L1 part of an elastic net (same prox as 'l1' -- the smooth
    quadratic part is carried by the problem's gamma).
    """

    kind: str = "none"
    lam: float = 0.0

    _KINDS = ("none", "l1", "elastic_net_extra")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.kind == "none" and self.lam != 0.0:
            raise ValueError("kind 'none' requires lam == 0")

    @property
    def is_none(self):
        return self.kind == "none"

    def value(self, w: np.ndarray) -> float:
        if self.is_none:
            return 0.0
        return float(self.lam * np.sum(np.abs(w)))

    def prox(self, v: np.ndarray, t: float = 1.0) -> np.ndarray:
        """Coordinatewise prox of t*r: soft threshold at t*lam (identity for 'none')."""
        if self.is_none:
            return np.array(v, copy=True)
        thr = t * self.lam
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


NO_REG = Regularizer()


def l1(lam: float) -> Regularizer:
    return Regularizer("l1", lam)


def elastic_net_extra(lam: float) -> Regularizer:
    return Regularizer("elastic_net_extra", lam)


# ---------------------------------------------------------------------------
# dataset / problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix (n x d) plus a response vector of length n."""

    features: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.responses, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-d, got ndim={X.ndim}")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be at least 1x1, got {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(
                f"responses must have shape ({X.shape[0]},), got {y.shape}"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite entries")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses contain non-finite entries")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "responses", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class Problem:
    """An ERM instance: dataset, loss, ridge strength gamma, optional r."""

    data: Dataset
    loss_name: str = "quadratic"
    gamma: float = 0.0
    reg: Regularizer = field(default_factory=Regularizer)

    def __post_init__(self):
        get_loss(self.loss_name)
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.loss_name == "logistic":
            y = self.data.responses
            if not np.all(np.isin(y, (-1.0, 1.0))):
                raise ValueError("logistic loss requires labels in {-1, +1}")

    @property
    def loss(self):
        return get_loss(self.loss_name)

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def d(self) -> int:
        return self.data.d


@dataclass
class IterateState:
    """Current iterate, its (fresh) smooth-part gradient, and step count."""

    w: np.ndarray
    g: np.ndarray
    iteration: int = 0


def _check_w(problem: Problem, w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (problem.d,):
        raise ValueError(f"w must have shape ({problem.d},), got {w.shape}")
    return w


def objective(problem: Problem, w) -> float:
    """Full objective (1/n) sum l_j + (gamma/2) ||w||^2 + r(w)."""
    w = _check_w(problem, w)
    X, y = problem.data.features, problem.data.responses
    with np.errstate(over="ignore", invalid="ignore"):
        z = X @ w
        val = (
            float(np.mean(problem.loss.value(z, y)))
            + 0.5 * problem.gamma * float(w @ w)
            + problem.reg.value(w)
        )
    if not np.isfinite(val):
        raise NumericError("objective is non-finite")
    return val


def gradient(problem: Problem, w) -> np.ndarray:
    """Gradient of the smooth part F only: (1/n) X' l'(Xw) + gamma w."""
    w = _check_w(problem, w)
    X, y = problem.data.features, problem.data.responses
    z = X @ w
    g = X.T @ problem.loss.d1(z, y) / problem.n + problem.gamma * w
    if not np.all(np.isfinite(g)):
        raise NumericError("gradient is non-finite")
    return g


def scaled_row_matrix(problem: Problem, w) -> np.ndarray:
    """Row-scaled data matrix A with rows sqrt(l''(x_j' w; y_j)) x_j.

    Satisfies H(w) = (1/n) A' A + gamma I, which is the factorization all
    sketching is performed on.
    """
    w = _check_w(problem, w)
    X, y = problem.data.features, problem.data.responses
    d2 = problem.loss.d2(X @ w, y)
    if np.any(d2 < 0):
        raise AssertionError("loss curvature must be nonnegative")
    return np.sqrt(d2)[:, None] * X


def exact_hessian(problem: Problem, w) -> np.ndarray:
    """Exact Hessian of the smooth part, (1/n) A' A + gamma I."""
    A = scaled_row_matrix(problem, w)
    H = A.T @ A / problem.n
    H[np.diag_indices_from(H)] += problem.gamma
    # symmetrize away matmul roundoff
    return 0.5 * (H + H.T)
