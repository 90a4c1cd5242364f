"""Numeric inner loops, compiled with numba when available.

Every kernel exists twice: a plain-numpy reference (``*_np``) and a numba
``@njit`` version (``*_nb``). The public names bind to the numba version
unless numba is missing or ``ADTALK_NO_NUMBA`` is set to a truthy value
before import. Both paths are exercised by the test suite and compared in
``benchmarks/bench_kernels.py``.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - depends on environment
    numba = None

_DISABLED = os.environ.get("ADTALK_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED


def _midpoint(a, b):
    m = a + (b - a) / 2.0
    # adjacent floats: keep b on the right-hand side
    if m >= b:
        m = a
    return m


# ---------------------------------------------------------------- stump scan


def _side_score_np(wp, wn, eps):
    # clipping the log-odds (not p) keeps f exactly antisymmetric in the labels
    total = wp + wn
    bound = np.log((1.0 - eps) / eps)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = 0.5 * np.clip(np.log(wp) - np.log(wn), -bound, bound)
    f = np.where(total > 0, f, 0.0)
    z = wp * np.exp(-f) + wn * np.exp(f)
    return f, z


def split_losses_np(xs, ys, ws, eps):
    """Exponential loss of every candidate split of one sorted feature column.

    ``xs`` must be sorted ascending with ``ys``/``ws`` permuted alongside.
    Candidate 0 is the ``-inf`` guard (empty left side); the rest are the
    midpoints between consecutive distinct values. Returns
    ``(thresholds, z, score_left, score_right)``.
    """
    xs = np.asarray(xs, dtype=np.float64)
    pos = np.asarray(ys) > 0
    ws = np.asarray(ws, dtype=np.float64)
    wp = np.where(pos, ws, 0.0)
    wn = np.where(pos, 0.0, ws)
    cwp = np.cumsum(wp)
    cwn = np.cumsum(wn)
    tot_p = cwp[-1]
    tot_n = cwn[-1]

    cut = np.nonzero(xs[:-1] < xs[1:])[0]
    thresholds = np.empty(cut.size + 1)
    thresholds[0] = -np.inf
    for j, i in enumerate(cut):
        thresholds[j + 1] = _midpoint(xs[i], xs[i + 1])

    lp = np.concatenate(([0.0], cwp[cut]))
    ln = np.concatenate(([0.0], cwn[cut]))
    rp = tot_p - lp
    rn = tot_n - ln
    # guard candidate: right side is everything, avoid cancellation
    rp[0] = tot_p
    rn[0] = tot_n
    fl, zl = _side_score_np(lp, ln, eps)
    fr, zr = _side_score_np(rp, rn, eps)
    return thresholds, zl + zr, fl, fr


def _split_losses_py(xs, ys, ws, eps):
    n = xs.shape[0]
    m = 1
    for i in range(n - 1):
        if xs[i] < xs[i + 1]:
            m += 1
    thresholds = np.empty(m)
    z = np.empty(m)
    sl = np.empty(m)
    sr = np.empty(m)

    tot_p = 0.0
    tot_n = 0.0
    for i in range(n):
        if ys[i] > 0:
            tot_p += ws[i]
        else:
            tot_n += ws[i]

    lp = 0.0
    ln = 0.0
    k = 0
    for i in range(-1, n - 1):
        if i >= 0:
            if ys[i] > 0:
                lp += ws[i]
            else:
                ln += ws[i]
            if not xs[i] < xs[i + 1]:
                continue
            a = xs[i]
            b = xs[i + 1]
            t = a + (b - a) / 2.0
            if t >= b:
                t = a
            thresholds[k] = t
            rp = tot_p - lp
            rn = tot_n - ln
        else:
            thresholds[k] = -np.inf
            rp = tot_p
            rn = tot_n
        zk = 0.0
        for side in range(2):
            if side == 0:
                wp = lp
                wn = ln
            else:
                wp = rp
                wn = rn
            tot = wp + wn
            f = 0.0
            if tot > 0:
                bound = np.log((1.0 - eps) / eps)
                if wp <= 0.0:
                    lo = -bound
                elif wn <= 0.0:
                    lo = bound
                else:
                    lo = np.log(wp) - np.log(wn)
                    if lo < -bound:
                        lo = -bound
                    elif lo > bound:
                        lo = bound
                f = 0.5 * lo
            zk += wp * np.exp(-f) + wn * np.exp(f)
            if side == 0:
                sl[k] = f
            else:
                sr[k] = f
        z[k] = zk
        k += 1
    return thresholds, z, sl, sr


# ------------------------------------------------------------ autocorrelation


def max_autocorr_np(x, lag_min, lag_max):
    """Largest normalized autocorrelation of ``x`` over lags ``[lag_min, lag_max]``.

    r(k) = sum x[n] x[n+k] / sqrt(sum x[n]^2 * sum x[n+k]^2), both energy
    sums taken over the overlapping part only. Returns 0.0 when no lag in
    range has nonzero energy.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    lag_max = min(lag_max, n - 1)
    if lag_max < lag_min or lag_min < 1:
        return 0.0
    full = np.correlate(x, x, mode="full")[n - 1:]
    sq = x * x
    e = np.concatenate(([0.0], np.cumsum(sq)))
    # suffix sums taken directly so a loud head cannot cancel a quiet tail
    r = np.concatenate((np.cumsum(sq[::-1])[::-1], [0.0]))
    lags = np.arange(lag_min, lag_max + 1)
    num = full[lags]
    head = e[n - lags]  # x[0 : n-k]
    tail = r[lags]  # x[k : n]
    den = np.sqrt(head * tail)
    ok = den > 0
    if not ok.any():
        return 0.0
    return float(np.max(num[ok] / den[ok]))


def _max_autocorr_py(x, lag_min, lag_max):
    n = x.shape[0]
    if lag_max > n - 1:
        lag_max = n - 1
    best = 0.0
    found = False
    if lag_max < lag_min or lag_min < 1:
        return 0.0
    for k in range(lag_min, lag_max + 1):
        num = 0.0
        e1 = 0.0
        e2 = 0.0
        for i in range(n - k):
            a = x[i]
            b = x[i + k]
            num += a * b
            e1 += a * a
            e2 += b * b
        den = np.sqrt(e1 * e2)
        if den > 0:
            r = num / den
            if not found or r > best:
                best = r
                found = True
    return best


# ---------------------------------------------------------- transition counts


def transition_counts_np(states, n_states):
    s = np.asarray(states, dtype=np.int64)
    flat = np.bincount(s[:-1] * n_states + s[1:], minlength=n_states * n_states)
    return flat.reshape(n_states, n_states)


def _transition_counts_py(states, n_states):
    counts = np.zeros((n_states, n_states), dtype=np.int64)
    for i in range(states.shape[0] - 1):
        counts[states[i], states[i + 1]] += 1
    return counts


# ------------------------------------------------------------------- binding

if HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)
    split_losses_nb = _jit(_split_losses_py)
    max_autocorr_nb = _jit(_max_autocorr_py)
    transition_counts_nb = _jit(_transition_counts_py)
else:  # pragma: no cover
    split_losses_nb = max_autocorr_nb = transition_counts_nb = None


def _wrap_split(fn):
    def split_losses(xs, ys, ws, eps):
        return fn(np.ascontiguousarray(xs, dtype=np.float64),
                  np.ascontiguousarray(ys, dtype=np.float64),
                  np.ascontiguousarray(ws, dtype=np.float64), float(eps))
    return split_losses


def _wrap_autocorr(fn):
    def max_autocorr(x, lag_min, lag_max):
        return float(fn(np.ascontiguousarray(x, dtype=np.float64), int(lag_min), int(lag_max)))
    return max_autocorr


def _wrap_counts(fn):
    def transition_counts(states, n_states):
        return fn(np.ascontiguousarray(states, dtype=np.int64), int(n_states))
    return transition_counts


NUMPY_KERNELS = {
    "split_losses": split_losses_np,
    "max_autocorr": max_autocorr_np,
    "transition_counts": transition_counts_np,
}
NUMBA_KERNELS = {
    "split_losses": _wrap_split(split_losses_nb),
    "max_autocorr": _wrap_autocorr(max_autocorr_nb),
    "transition_counts": _wrap_counts(transition_counts_nb),
} if HAVE_NUMBA else {}

if USE_NUMBA:
    split_losses = _wrap_split(split_losses_nb)
    max_autocorr = _wrap_autocorr(max_autocorr_nb)
    transition_counts = _wrap_counts(transition_counts_nb)
else:
    split_losses = split_losses_np
    max_autocorr = max_autocorr_np
    transition_counts = transition_counts_np

BACKEND = "numba" if USE_NUMBA else "numpy"
