"""Real AdaBoost over decision stumps, and a logistic-regression baseline.

Each stump outputs half the log-odds of the weighted class probability on
its side of the split; the ensemble score is the sum of stump outputs and
its sign is the predicted class (+1 = AD, ties go to AD).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateStumpError, TrainingError, ValidationError

EPS = 1e-6
DEFAULT_ROUNDS = 10
# relative slack when comparing split losses, so float noise cannot break ties
_Z_RTOL = 1e-12


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValidationError("features must be a 2-D array (instances x features)")
    if y.shape != (X.shape[0],):
        raise ValidationError("one label per instance required")
    if not np.all((y == 1) | (y == -1)):
        raise ValidationError("labels must be +1 or -1")
    return X, y.astype(np.int64)


def label_of(score):
    """Sign rule with zero mapped to +1."""
    return np.where(np.asarray(score) >= 0, 1, -1)


@dataclass(frozen=True)
class Stump:
    feature_index: int
    threshold: float
    score_left: float
    score_right: float

    def scores(self, X):
        col = np.asarray(X, dtype=np.float64)[:, self.feature_index]
        return np.where(col <= self.threshold, self.score_left, self.score_right)

    def predict_score(self, x):
        return self.score_left if x[self.feature_index] <= self.threshold else self.score_right


def fit_stump(X, y, w, eps=EPS):
    """Best single split under the exponential-loss criterion.

    Returns ``(stump, z)`` where ``z = sum_i w_i exp(-y_i f(x_i))``. Ties
    go to the lowest feature index, then the lowest threshold.
    """
    X, y = _check_xy(X, y)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != y.shape:
        raise ValidationError("one weight per instance required")
    if np.all(y == y[0]):
        raise DegenerateStumpError("all instances carry the same label")

    best = None
    best_z = math.inf
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        th, z, sl, sr = _kernels.split_losses(X[order, j], y[order], w[order], eps)
        k = int(np.argmin(z))
        zk = float(z[k])
        # first index attaining the (tolerant) minimum is the lowest threshold
        k = int(np.flatnonzero(z <= zk + _Z_RTOL * max(1.0, zk))[0])
        zk = float(z[k])
        if best is None or zk < best_z - _Z_RTOL * max(1.0, best_z):
            best_z = zk
            best = Stump(j, float(th[k]), float(sl[k]), float(sr[k]))
    return best, best_z


@dataclass
class Ensemble:
    stumps: list = field(default_factory=list)
    n_features: int | None = None
    stop_reason: str | None = None

    @property
    def rounds(self):
        return len(self.stumps)

    def scores(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if self.n_features is not None and X.shape[1] != self.n_features:
            raise ValidationError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.zeros(X.shape[0])
        for s in self.stumps:
            out += s.scores(X)
        return out

    def predict_score(self, x):
        return float(self.scores(np.asarray(x, dtype=np.float64)[None, :])[0])

    def predict(self, X):
        return label_of(self.scores(X))

    def to_json(self, **meta):
        obj = {"_meta": meta} if meta else {}
        obj["criterion"] = "exponential loss; ties -> lowest feature, lowest threshold; eps=1e-06"
        obj["rounds"] = self.rounds
        obj["n_features"] = self.n_features
        obj["stumps"] = [{"feature_index": s.feature_index, "threshold": s.threshold,
                          "score_left": s.score_left, "score_right": s.score_right}
                         for s in self.stumps]
        return json.dumps(obj, indent=1)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        stumps = [Stump(int(s["feature_index"]), float(s["threshold"]),
                        float(s["score_left"]), float(s["score_right"])) for s in obj["stumps"]]
        if obj.get("rounds", len(stumps)) != len(stumps):
            raise ValidationError("model JSON: rounds does not match the number of stumps")
        return cls(stumps, obj.get("n_features"))


def train_real_adaboost(X, y, rounds=DEFAULT_ROUNDS, eps=EPS, trace=None):
    """Fit ``rounds`` stumps, reweighting by ``w_i *= exp(-y_i f_m(x_i))``.

    Training stops early when a stump's weighted error reaches 0.5. If
    ``trace`` is a list, the normalised weights before each round are
    appended to it.
    """
    X, y = _check_xy(X, y)
    if X.shape[0] < 2:
        raise TrainingError("need at least two instances")
    n = X.shape[0]
    w = np.full(n, 1.0 / n)
    model = Ensemble([], X.shape[1])
    for m in range(rounds):
        try:
            stump, _ = fit_stump(X, y, w, eps)
        except DegenerateStumpError as exc:
            if m == 0:
                raise TrainingError(f"round 1: {exc}") from exc
            model.stop_reason = f"degenerate stump in round {m + 1}"
            break
        f = stump.scores(X)
        err = float(w[label_of(f) != y].sum())
        if err >= 0.5:
            model.stop_reason = f"weighted error {err:.3f} >= 0.5 in round {m + 1}"
            break
        if trace is not None:
            trace.append(w.copy())
        model.stumps.append(stump)
        w = w * np.exp(-y * f)
        w /= w.sum()
    return model


def exp_loss(model, X, y):
    return float(np.sum(np.exp(-np.asarray(y) * model.scores(X))))


# ---------------------------------------------------------------- baseline


@dataclass
class LogisticModel:
    weights: np.ndarray
    intercept: float
    center: np.ndarray
    scale: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float

    def scores(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.weights.size:
            raise ValidationError(f"expected {self.weights.size} features, got {X.shape[1]}")
        return ((X - self.center) / self.scale) @ self.weights + self.intercept

    def predict_score(self, x):
        return float(self.scores(x)[0])

    def predict(self, X):
        return label_of(self.scores(X))


def logistic_objective(params, X, y, l2):
    """Penalised log-likelihood and its gradient; ``params = [w..., b]``.

    The intercept ``b`` is not penalised.
    """
    w, b = params[:-1], params[-1]
    m = y * (X @ w + b)
    # log sigmoid(m), stable for both signs
    ll = -np.sum(np.logaddexp(0.0, -m)) - 0.5 * l2 * float(w @ w)
    r = y * np.exp(-np.logaddexp(0.0, m))  # y * sigmoid(-m)
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r - l2 * w
    grad[-1] = r.sum()
    return float(ll), grad


def train_logistic_baseline(X, y, l2=1e-4, max_iter=1000, tol=1e-8, standardize=True):
    """L2-penalised logistic regression by gradient ascent with backtracking.

    Features are z-scored first (constant columns only centred) so one step
    size suits all coordinates; the model applies the same transform.
    """
    X, y = _check_xy(X, y)
    if X.shape[0] < 2 or len(set(y.tolist())) < 2:
        raise TrainingError("need at least two instances of both labels")
    center = X.mean(axis=0) if standardize else np.zeros(X.shape[1])
    scale = X.std(axis=0) if standardize else np.ones(X.shape[1])
    scale = np.where(scale > 0, scale, 1.0)
    Z = (X - center) / scale
    yf = y.astype(np.float64)

    params = np.zeros(X.shape[1] + 1)
    f, g = logistic_objective(params, Z, yf, l2)
    step = 1.0
    it = 0
    gnorm = float(np.max(np.abs(g)))
    while gnorm >= tol and it < max_iter:
        it += 1
        gg = float(g @ g)
        step = min(step * 2.0, 1e6)
        while True:
            cand = params + step * g
            fc, gc = logistic_objective(cand, Z, yf, l2)
            if fc >= f + 0.5 * step * gg or step < 1e-20:
                break
            step *= 0.5
        if fc < f:
            break
        params, f, g = cand, fc, gc
        gnorm = float(np.max(np.abs(g)))
    return LogisticModel(params[:-1].copy(), float(params[-1]), center, scale,
                         gnorm < tol, it, gnorm)


TRAINERS = {
    "adaboost": train_real_adaboost,
    "logistic": train_logistic_baseline,
}
