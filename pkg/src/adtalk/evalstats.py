"""Cross-validation, classification metrics, ROC curves and t-based tests."""

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .boosting import label_of
from .errors import EmptyInputError, FoldError, ValidationError

AD, NONAD = 1, -1


@dataclass(frozen=True)
class Prediction:
    dialogue_id: str
    true_label: int
    score: float
    predicted_label: int
    fold: int
    round: int = 0


# ------------------------------------------------------------------- splits


def stratified_kfold(labels, k=10, seed=0):
    """Fold index per instance.

    Each class is shuffled with a seeded generator and dealt round-robin;
    the deal continues across classes so fold totals stay balanced too.
    """
    labels = np.asarray(labels)
    n = labels.size
    if k < 2:
        raise ValidationError("k must be at least 2")
    if k > n:
        raise ValidationError(f"k={k} exceeds the number of instances ({n})")
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=np.int64)
    pos = 0
    for cls in sorted(set(labels.tolist()), reverse=True):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = (pos + np.arange(idx.size)) % k
        pos += idx.size
    return folds


def _fit_predict(trainer, X, y, ids, train, test, fold, rnd):
    try:
        model = trainer(X[train], y[train])
        scores = model.scores(X[test])
    except Exception as exc:  # annotate and re-raise with the fold id
        raise FoldError(fold, exc) from exc
    labs = label_of(scores)
    return [Prediction(ids[i], int(y[i]), float(s), int(p), fold, rnd)
            for i, s, p in zip(test, scores, labs)]


def cross_validate(X, y, ids, trainer, k=10, seed=0, rnd=0):
    """Stratified k-fold predictions, one per instance, sorted by dialogue id."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    folds = stratified_kfold(y, k, seed)
    preds = []
    for f in range(k):
        test = np.flatnonzero(folds == f)
        train = np.flatnonzero(folds != f)
        preds += _fit_predict(trainer, X, y, ids, train, test, f, rnd)
    return sorted(preds, key=lambda p: (p.round, p.dialogue_id))


def loocv(X, y, ids, trainer):
    """Leave-one-out predictions; the fold id is the held-out instance index."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    if n < 2:
        raise ValidationError("LOOCV needs at least two instances")
    preds = []
    everyone = np.arange(n)
    for i in range(n):
        preds += _fit_predict(trainer, X, y, ids, everyone[everyone != i], np.array([i]), i, 0)
    return preds


# ------------------------------------------------------------------ metrics


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __add__(self, o):
        return Confusion(self.tp + o.tp, self.fp + o.fp, self.tn + o.tn, self.fn + o.fn)

    @property
    def n(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def precision(self):
        d = self.tp + self.fp
        return self.tp / d if d else None

    @property
    def recall(self):
        d = self.tp + self.fn
        return self.tp / d if d else None

    @property
    def f1(self):
        p, r = self.precision, self.recall
        if p is None or r is None:
            return None
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.n if self.n else None


def confusion(preds, positive=AD):
    c = Confusion()
    for p in preds:
        hit_pos = p.predicted_label == positive
        is_pos = p.true_label == positive
        c = c + Confusion(int(hit_pos and is_pos), int(hit_pos and not is_pos),
                          int(not hit_pos and not is_pos), int(not hit_pos and is_pos))
    return c


@dataclass
class ClassMetrics:
    accuracy_micro: float | None
    precision_micro: float | None
    recall_micro: float | None
    f1_micro: float | None
    precision_macro: float | None
    recall_macro: float | None
    f1_macro: float | None
    confusion: Confusion
    macro_excluded: dict


@dataclass
class MetricsReport:
    classes: dict  # "AD" / "NonAD" -> ClassMetrics
    overall_accuracy: float
    n: int
    n_folds: int

    def to_dict(self):
        out = {}
        for name, m in self.classes.items():
            out[name] = {
                "Accuracy_mu": m.accuracy_micro, "Precision_mu": m.precision_micro,
                "Recall_mu": m.recall_micro, "F1_mu": m.f1_micro,
                "Precision_M": m.precision_macro, "Recall_M": m.recall_macro, "F1_M": m.f1_macro,
                "confusion": {"tp": m.confusion.tp, "fp": m.confusion.fp,
                              "tn": m.confusion.tn, "fn": m.confusion.fn},
                "macro_excluded_folds": m.macro_excluded,
            }
        out["overall_accuracy"] = self.overall_accuracy
        out["n"] = self.n
        out["n_folds"] = self.n_folds
        return out


def _mean_defined(values):
    vals = [v for v in values if v is not None]
    return (sum(vals) / len(vals) if vals else None), len(values) - len(vals)


def compute_metrics(preds, positive_class=AD):
    """Micro (pooled) and macro (mean over folds) metrics for both classes.

    Per-class ``accuracy_micro`` is the fraction of that class's instances
    classified correctly, which coincides with its recall. Folds where a
    metric is undefined are left out of that macro mean and counted in
    ``macro_excluded``. ``positive_class`` only decides which perspective is
    listed first.
    """
    preds = list(preds)
    if not preds:
        raise EmptyInputError("no predictions")
    by_fold = {}
    for p in preds:
        by_fold.setdefault((p.round, p.fold), []).append(p)
    order = (AD, NONAD) if positive_class == AD else (NONAD, AD)
    classes = {}
    for cls in order:
        pooled = confusion(preds, cls)
        per_fold = [confusion(ps, cls) for _, ps in sorted(by_fold.items())]
        pm, pex = _mean_defined([c.precision for c in per_fold])
        rm, rex = _mean_defined([c.recall for c in per_fold])
        fm, fex = _mean_defined([c.f1 for c in per_fold])
        classes["AD" if cls == AD else "NonAD"] = ClassMetrics(
            pooled.recall, pooled.precision, pooled.recall, pooled.f1, pm, rm, fm, pooled,
            {"precision": pex, "recall": rex, "f1": fex})
    correct = sum(p.predicted_label == p.true_label for p in preds)
    return MetricsReport(classes, correct / len(preds), len(preds), len(by_fold))


# ---------------------------------------------------------------------- ROC


@dataclass
class RocCurve:
    thresholds: np.ndarray  # +inf first, then distinct scores descending
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_csv(self, header_lines=()):
        buf = io.StringIO()
        for h in header_lines:
            buf.write(f"# {h}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for t, f, p in zip(self.thresholds, self.fpr, self.tpr):
            w.writerow([repr(float(t)), repr(float(f)), repr(float(p))])
        buf.write(f"# auc={self.auc!r}\n")
        return buf.getvalue()


def roc_curve(scores, labels, positive=AD):
    """Threshold sweep over distinct scores, highest first, with trapezoid AUC."""
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(labels) == positive
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("ROC needs both classes among the labels")
    order = np.argsort(-scores, kind="stable")
    s, p = scores[order], pos[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]  # end of each tie group
    tp = np.cumsum(p)[last]
    fp = np.cumsum(~p)[last]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s[last]]
    if last.size == 1:
        warnings.warn("all scores identical; ROC degenerates to two points", RuntimeWarning, stacklevel=2)
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(thresholds, fpr, tpr, auc)


def roc_smoothed(X, y, ids, trainer, rounds=10, k=10, seed=0):
    """Pool scores from ``rounds`` repetitions of k-fold CV (seed + r) into one curve."""
    preds = []
    for r in range(rounds):
        preds += cross_validate(X, y, ids, trainer, k=k, seed=seed + r, rnd=r)
    preds.sort(key=lambda p: (p.round, p.dialogue_id))
    curve = roc_curve([p.score for p in preds], [p.true_label for p in preds])
    return curve, preds


# -------------------------------------------------------- t distribution


def _betacf(a, b, x, max_iter=500, eps=1e-16):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_reg(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    lbt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
           + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(lbt) * _betacf(a, b, x) / a
    return 1.0 - math.exp(lbt) * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t, df):
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return betainc_reg(df / 2.0, 0.5, df / (df + t * t))


def t_cdf(t, df):
    half = 0.5 * t_sf_two_sided(t, df)
    return 1.0 - half if t > 0 else half


@dataclass(frozen=True)
class PearsonResult:
    r: float
    t: float
    df: int
    p: float
    n: int

    def format(self):
        return f"rho={self.r:.3f}, t({self.df})={self.t:.2f}, p={self.p:.3f}, n={self.n}"


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float

    def format(self):
        return f"t({self.df:.1f})={self.t:.2f}, p={self.p:.2f}"


def pearson_test(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if y.size != n:
        raise ValidationError("x and y must have equal length")
    if n < 3:
        raise ValidationError("need at least three pairs")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ValidationError("correlation undefined: zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    df = n - 2
    if abs(r) == 1.0:
        return PearsonResult(r, math.copysign(math.inf, r), df, 0.0, n)
    t = r * math.sqrt(df) / math.sqrt(1.0 - r * r)
    return PearsonResult(r, t, df, t_sf_two_sided(t, df), n)


def welch_from_stats(mean_a, var_a, n_a, mean_b, var_b, n_b):
    """Welch test from group means, sample variances (n-1) and sizes."""
    if n_a < 2 or n_b < 2:
        raise ValidationError("each group needs at least two observations")
    va, vb = var_a / n_a, var_b / n_b
    se2 = va + vb
    diff = mean_a - mean_b
    if se2 == 0:
        if diff == 0:
            return WelchResult(0.0, float(n_a + n_b - 2), 1.0)
        return WelchResult(math.copysign(math.inf, diff), float(n_a + n_b - 2), 0.0)
    t = diff / math.sqrt(se2)
    df = se2 * se2 / (va * va / (n_a - 1) + vb * vb / (n_b - 1))
    return WelchResult(t, df, t_sf_two_sided(t, df))


def welch_ttest(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValidationError("each group needs at least two observations")
    return welch_from_stats(a.mean(), a.var(ddof=1), a.size, b.mean(), b.var(ddof=1), b.size)
