"""Hot numeric loops, in two flavours.

Every kernel exists as a plain-numpy implementation (``np_*``) and, when numba
is importable, as an ``@njit`` compiled loop (``nb_*``).  The public names
(``dispersion``, ``rolling_std``, ``hamilton``, ``kim``, ``bartlett_lrv``)
point at the numba versions unless ``HERDKIT_DISABLE_NUMBA`` is set to a
truthy value before import.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

_flag = os.environ.get("HERDKIT_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAS_NUMBA and _flag not in ("1", "true", "yes", "on")

SMOOTHER_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def np_dispersion(returns, mask, min_assets):
    """Per-date count, equal-weighted mean, CSAD and CSSD.

    Dates with fewer than ``min_assets`` observed returns get n=0 and NaN.
    """
    vals = np.where(mask, returns, 0.0)
    n = mask.sum(axis=1)
    keep = n >= min_assets
    safe_n = np.where(keep, n, 1)
    rm = vals.sum(axis=1) / safe_n
    # second pass corrects the rounding error of the first mean
    rm = rm + np.where(mask, returns - rm[:, None], 0.0).sum(axis=1) / safe_n
    dev = np.where(mask, returns - rm[:, None], 0.0)
    csad = np.abs(dev).sum(axis=1) / safe_n
    cssd = np.sqrt((dev * dev).sum(axis=1) / np.maximum(safe_n - 1, 1))
    rm = np.where(keep, rm, np.nan)
    csad = np.where(keep, csad, np.nan)
    cssd = np.where(keep, cssd, np.nan)
    return np.where(keep, n, 0).astype(np.int64), rm, csad, cssd


def np_rolling_std(x, window):
    """Sample std (ddof=1) of x[t-window:t], i.e. strictly past values.

    Entries t < window are NaN.
    """
    out = np.full(x.shape[0], np.nan)
    if x.shape[0] <= window:
        return out
    views = np.lib.stride_tricks.sliding_window_view(x, window)[:-1]
    m = views.mean(axis=1)
    m += (views - m[:, None]).mean(axis=1)
    dev = views - m[:, None]
    out[window:] = np.sqrt((dev * dev).sum(axis=1) / (window - 1))
    return out


def np_hamilton(logdens, trans, init):
    T, K = logdens.shape
    # densities rescaled per date; the scale is added back to the log-likelihood
    m = logdens.max(axis=1)
    dens = np.exp(logdens - m[:, None])
    filtered = np.empty((T, K))
    predicted = np.empty((T, K))
    scale = np.empty(T)
    pred = init.astype(np.float64).copy()
    for t in range(T):
        predicted[t] = pred
        d = dens[t]
        s = pred @ d
        if not (s > 0.0) or not np.isfinite(s):
            return filtered, predicted, -np.inf, t
        scale[t] = s
        filtered[t] = pred * d / s
        pred = filtered[t] @ trans
    return filtered, predicted, float(np.sum(m + np.log(scale))), -1


def np_kim(filtered, trans):
    T, K = filtered.shape
    pred = filtered[:-1] @ trans
    low = pred < SMOOTHER_FLOOR
    floored = int(low.sum())
    if floored:
        pred = np.where(low, SMOOTHER_FLOOR, pred)
    smoothed = np.empty((T, K))
    ratio = np.empty((T - 1, K))
    smoothed[T - 1] = filtered[T - 1]
    for t in range(T - 2, -1, -1):
        r = smoothed[t + 1] / pred[t]
        ratio[t] = r
        v = trans @ r
        f = filtered[t]
        smoothed[t] = f * v / (f @ v)
    # sum over t of filtered[t, i] * trans[i, j] * ratio[t, j]
    xi = trans * (filtered[:-1].T @ ratio)
    return smoothed, xi, floored


def np_bartlett_lrv(u, bandwidth):
    n = u.shape[0]
    total = float(u @ u) / n
    for j in range(1, bandwidth + 1):
        w = 1.0 - j / (bandwidth + 1.0)
        total += 2.0 * w * float(u[j:] @ u[:-j]) / n
    return total


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def nb_dispersion(returns, mask, min_assets):
        T, N = returns.shape
        n = np.zeros(T, dtype=np.int64)
        rm = np.full(T, np.nan)
        csad = np.full(T, np.nan)
        cssd = np.full(T, np.nan)
        for t in range(T):
            c = 0
            s = 0.0
            for i in range(N):
                if mask[t, i]:
                    c += 1
                    s += returns[t, i]
            if c < min_assets:
                continue
            m = s / c
            # second pass corrects the rounding error of the first mean
            r = 0.0
            for i in range(N):
                if mask[t, i]:
                    r += returns[t, i] - m
            m += r / c
            ad = 0.0
            sq = 0.0
            for i in range(N):
                if mask[t, i]:
                    d = returns[t, i] - m
                    ad += abs(d)
                    sq += d * d
            n[t] = c
            rm[t] = m
            csad[t] = ad / c
            cssd[t] = np.sqrt(sq / (c - 1))
        return n, rm, csad, cssd

    @njit(cache=True)
    def nb_rolling_std(x, window):
        T = x.shape[0]
        out = np.full(T, np.nan)
        for t in range(window, T):
            m = 0.0
            for j in range(t - window, t):
                m += x[j]
            m /= window
            r = 0.0
            for j in range(t - window, t):
                r += x[j] - m
            m += r / window
            ss = 0.0
            for j in range(t - window, t):
                d = x[j] - m
                ss += d * d
            out[t] = np.sqrt(ss / (window - 1))
        return out

    @njit(cache=True)
    def nb_hamilton(logdens, trans, init):
        T, K = logdens.shape
        filtered = np.empty((T, K))
        predicted = np.empty((T, K))
        pred = init.astype(np.float64).copy()
        joint = np.empty(K)
        loglik = 0.0
        for t in range(T):
            m = logdens[t, 0]
            for k in range(1, K):
                if logdens[t, k] > m:
                    m = logdens[t, k]
            s = 0.0
            for k in range(K):
                joint[k] = pred[k] * np.exp(logdens[t, k] - m)
                s += joint[k]
            if not (s > 0.0) or not np.isfinite(s):
                return filtered, predicted, -np.inf, t
            loglik += m + np.log(s)
            for k in range(K):
                predicted[t, k] = pred[k]
                filtered[t, k] = joint[k] / s
            for j in range(K):
                acc = 0.0
                for i in range(K):
                    acc += filtered[t, i] * trans[i, j]
                pred[j] = acc
        return filtered, predicted, loglik, -1

    @njit(cache=True)
    def nb_kim(filtered, trans):
        T, K = filtered.shape
        smoothed = np.empty((T, K))
        xi = np.zeros((K, K))
        pred = np.empty(K)
        ratio = np.empty(K)
        for k in range(K):
            smoothed[T - 1, k] = filtered[T - 1, k]
        floored = 0
        for t in range(T - 2, -1, -1):
            for j in range(K):
                acc = 0.0
                for i in range(K):
                    acc += filtered[t, i] * trans[i, j]
                if acc < SMOOTHER_FLOOR:
                    acc = SMOOTHER_FLOOR
                    floored += 1
                pred[j] = acc
                ratio[j] = smoothed[t + 1, j] / acc
            tot = 0.0
            for i in range(K):
                row = 0.0
                for j in range(K):
                    v = filtered[t, i] * trans[i, j] * ratio[j]
                    xi[i, j] += v
                    row += v
                smoothed[t, i] = row
                tot += row
            for i in range(K):
                smoothed[t, i] /= tot
        return smoothed, xi, floored

    @njit(cache=True)
    def nb_bartlett_lrv(u, bandwidth):
        n = u.shape[0]
        total = 0.0
        for t in range(n):
            total += u[t] * u[t]
        total /= n
        for j in range(1, bandwidth + 1):
            w = 1.0 - j / (bandwidth + 1.0)
            acc = 0.0
            for t in range(j, n):
                acc += u[t] * u[t - j]
            total += 2.0 * w * acc / n
        return total


if USE_NUMBA:
    dispersion = nb_dispersion
    rolling_std = nb_rolling_std
    hamilton = nb_hamilton
    kim = nb_kim
    bartlett_lrv = nb_bartlett_lrv
else:
    dispersion = np_dispersion
    rolling_std = np_rolling_std
    hamilton = np_hamilton
    kim = np_kim
    bartlett_lrv = np_bartlett_lrv

BACKEND = "numba" if USE_NUMBA else "numpy"
