"""K-regime Markov-switching CSAD regression estimated by EM over the Hamilton filter.

Transition convention: ``trans[i, j] = P(S_t = j | S_{t-1} = i)`` (rows sum to 1).
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from scipy import stats

from . import _kernels, report
from .design import CONST, RM_ABS, RM_SQ, VOL_CSAD, VOL_RM, HerdDesign, display_name, herd_design, lag_label
from .dispersion import DispersionSeries
from .panel import format_float
from .regress import HerdingVerdict, OlsFit, fit_ols, herding_verdict

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
SEMANTIC_LABELS = ("highest_volatility", "low_volatility", "best_income_high_vol", "highest_loss_high_vol")


class FilterError(ValueError):
    """All regime densities vanished at some date."""


class DegenerateFit(RuntimeError):
    """Every EM restart collapsed."""


class RegimeTieWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MsSpec:
    n_regimes: int = 4
    n_lags: int = 3
    vol_window: int | None = 30

    def __post_init__(self):
        if self.n_regimes < 1:
            raise ValueError("n_regimes must be >= 1")
        if self.n_lags < 0:
            raise ValueError("n_lags must be >= 0")
        if self.vol_window is not None and self.vol_window < 2:
            raise ValueError("vol_window must be >= 2")

    @property
    def regressors(self) -> tuple[str, ...]:
        labels = [CONST, RM_ABS, RM_SQ]
        if self.vol_window is not None:
            labels += [VOL_CSAD, VOL_RM]
        return tuple(labels + [lag_label(k) for k in range(1, self.n_lags + 1)])


@dataclass(frozen=True, eq=False)
class MsFit:
    beta: np.ndarray  # (K, p)
    sigma: np.ndarray  # (K,)
    trans: np.ndarray  # (K, K)
    init: np.ndarray  # (K,)
    filtered: np.ndarray  # (T, K)
    smoothed: np.ndarray  # (T, K)
    loglik: float
    se: np.ndarray
    tstat: np.ndarray
    pvalue: np.ndarray
    regime_r2: np.ndarray
    design_labels: tuple[str, ...]
    converged: bool
    n_iter: int
    loglik_trace: np.ndarray = field(repr=False)
    dates: np.ndarray | None = field(default=None, repr=False)
    labels: tuple[str, ...] = ()
    restart_logliks: tuple[float, ...] = ()
    n_degenerate: int = 0
    restart_traces: tuple[np.ndarray, ...] = field(default=(), repr=False)

    @property
    def n_regimes(self) -> int:
        return self.sigma.shape[0]

    @property
    def most_likely(self) -> np.ndarray:
        return self.smoothed.argmax(axis=1)

    def permute(self, order: Sequence[int]) -> "MsFit":
        """Relabel regimes: new regime r is old regime ``order[r]``."""
        o = np.asarray(order)
        return replace(
            self,
            beta=self.beta[o],
            sigma=self.sigma[o],
            trans=self.trans[np.ix_(o, o)],
            init=self.init[o],
            filtered=self.filtered[:, o],
            smoothed=self.smoothed[:, o],
            se=self.se[o],
            tstat=self.tstat[o],
            pvalue=self.pvalue[o],
            regime_r2=self.regime_r2[o],
            labels=tuple(self.labels[i] for i in o) if self.labels else (),
        )


@dataclass(frozen=True)
class RegimeLabeling:
    labels: tuple[str, ...]
    rm_mean: np.ndarray
    sigma: np.ndarray

    def __getitem__(self, s: int) -> str:
        return self.labels[s]


# ---------------------------------------------------------------------------
# design
# ---------------------------------------------------------------------------


def build_design(disp: DispersionSeries, spec: MsSpec) -> HerdDesign:
    """CSAD response plus (1, |Rm|, Rm^2, vol terms, lagged CSAD) regressors."""
    return herd_design(disp, n_lags=spec.n_lags, vol_window=spec.vol_window)


# ---------------------------------------------------------------------------
# filter / smoother
# ---------------------------------------------------------------------------


def regime_logdens(X, y, beta, sigma) -> np.ndarray:
    resid = y[:, None] - X @ np.asarray(beta).T
    sigma = np.asarray(sigma, dtype=np.float64)
    return -0.5 * (LOG_2PI + 2.0 * np.log(sigma)) - 0.5 * (resid / sigma) ** 2


def _check_params(beta, sigma, trans, init, X):
    beta = np.atleast_2d(np.asarray(beta, dtype=np.float64))
    sigma = np.asarray(sigma, dtype=np.float64).reshape(-1)
    trans = np.asarray(trans, dtype=np.float64)
    init = np.asarray(init, dtype=np.float64).reshape(-1)
    K = sigma.shape[0]
    if beta.shape != (K, X.shape[1]) or trans.shape != (K, K) or init.shape != (K,):
        raise ValueError("inconsistent parameter dimensions")
    if np.any(sigma <= 0):
        raise ValueError("sigma must be > 0")
    if np.any(trans < 0) or not np.allclose(trans.sum(axis=1), 1.0, atol=1e-10):
        raise ValueError("trans must be row-stochastic")
    if np.any(init < 0) or abs(init.sum() - 1.0) > 1e-10:
        raise ValueError("init_dist must be a probability vector")
    return beta, sigma, trans, init


def _filter(logdens, trans, init, dates=None):
    filtered, predicted, ll, bad = _kernels.hamilton(np.ascontiguousarray(logdens), np.ascontiguousarray(trans), init)
    if bad >= 0:
        where = str(dates[bad]) if dates is not None else f"row {bad}"
        raise FilterError(f"zero likelihood under every regime at {where} (density underflow)")
    return filtered, predicted, float(ll)


def hamilton_filter(beta, sigma, trans, init_dist, design, response, dates=None) -> tuple[np.ndarray, float]:
    """Filtered regime probabilities P(S_t | y_1..y_t) and the total log-likelihood."""
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    beta, sigma, trans, init = _check_params(beta, sigma, trans, init_dist, X)
    filtered, _, ll = _filter(regime_logdens(X, y, beta, sigma), trans, init, dates)
    return filtered, ll


def kim_smoother(filtered, trans) -> np.ndarray:
    """Full-sample regime probabilities P(S_t | y_1..y_T)."""
    smoothed, _, floored = _kernels.kim(np.ascontiguousarray(filtered, dtype=np.float64), np.ascontiguousarray(trans, dtype=np.float64))
    if floored:
        warnings.warn(f"kim_smoother: {floored} predicted probabilities floored at {_kernels.SMOOTHER_FLOOR}", RuntimeWarning)
    return smoothed


def ergodic(trans) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix."""
    P = np.asarray(trans, dtype=np.float64)
    K = P.shape[0]
    A = np.vstack([P.T - np.eye(K), np.ones((1, K))])
    b = np.zeros(K + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    pi = np.clip(pi, 0, None)
    return pi / pi.sum()


def loglik(beta, sigma, trans, init_dist, design, response) -> float:
    return hamilton_filter(beta, sigma, trans, init_dist, design, response)[1]


# ---------------------------------------------------------------------------
# EM
# ---------------------------------------------------------------------------


class _Degenerate(Exception):
    pass


def _wls(X, y, w):
    sw = np.sqrt(w)
    Xw = X * sw[:, None]
    coef, _, rank, _ = np.linalg.lstsq(Xw, y * sw, rcond=None)
    if rank < X.shape[1]:
        raise _Degenerate("weighted design rank deficient")
    return coef


def _m_step(X, y, resp, var_floor, min_weight):
    K = resp.shape[1]
    beta = np.empty((K, X.shape[1]))
    sigma = np.empty(K)
    for s in range(K):
        w = resp[:, s]
        tot = w.sum()
        if tot < min_weight:
            raise _Degenerate(f"regime {s} expected occupancy {tot:.3g} below threshold")
        beta[s] = _wls(X, y, w)
        e = y - X @ beta[s]
        var = float(w @ (e * e)) / tot
        if var <= var_floor:
            raise _Degenerate(f"regime {s} variance collapsed")
        sigma[s] = math.sqrt(var)
    return beta, sigma


def _initial_resp(X, y, K, rng, restart):
    T = y.shape[0]
    if K == 1:
        return np.ones((T, 1))
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    e = y - X @ coef
    score = np.abs(e) if restart % 2 == 0 else e
    ranks = np.argsort(np.argsort(score, kind="stable"), kind="stable")
    labels = (ranks * K) // T
    if restart >= 2:
        scramble = rng.random(T) < rng.uniform(0.2, 0.6)
        labels = np.where(scramble, rng.integers(0, K, size=T), labels)
        labels = rng.permutation(K)[labels]
    resp = np.zeros((T, K))
    resp[np.arange(T), labels] = 1.0
    return resp


@dataclass
class _Run:
    beta: np.ndarray
    sigma: np.ndarray
    trans: np.ndarray
    init: np.ndarray
    filtered: np.ndarray
    smoothed: np.ndarray
    loglik: float
    trace: list
    converged: bool
    n_iter: int


def _em_run(X, y, K, resp0, init_mode, max_iter, tol, dates):
    T = y.shape[0]
    min_weight = 1e-6 * T
    var_floor = 1e-10 * max(float(np.var(y)), 1e-300)
    beta, sigma = _m_step(X, y, resp0, var_floor, min_weight)
    trans = np.full((K, K), 0.1 / max(K - 1, 1)) if K > 1 else np.ones((1, 1))
    if K > 1:
        np.fill_diagonal(trans, 0.9)
    init = np.full(K, 1.0 / K)
    trace = []
    converged = False
    it = 0
    while True:
        try:
            filtered, _, ll = _filter(regime_logdens(X, y, beta, sigma), trans, init, dates)
        except FilterError as exc:
            raise _Degenerate(str(exc)) from None
        smoothed, xi, _ = _kernels.kim(filtered, trans)
        trace.append(ll)
        if it > 0 and ll - trace[-2] < tol:
            converged = True
            break
        if it >= max_iter:
            break
        beta, sigma = _m_step(X, y, smoothed, var_floor, min_weight)
        rows = xi.sum(axis=1, keepdims=True)
        trans = np.where(rows > 0, xi / np.where(rows > 0, rows, 1.0), trans)
        if init_mode == "estimate":
            init = smoothed[0].copy()
        it += 1
    return _Run(beta, sigma, trans, init, filtered, smoothed, ll, trace, converged, it)


def _regime_inference(X, y, smoothed, beta):
    K, p = beta.shape
    se = np.empty((K, p))
    r2 = np.empty(K)
    df = np.empty(K)
    for s in range(K):
        w = smoothed[:, s]
        tot = w.sum()
        e = y - X @ beta[s]
        dof = max(tot - p, 1.0)
        s2 = float(w @ (e * e)) / dof
        XtWX = X.T @ (X * w[:, None])
        cov = s2 * np.linalg.pinv(XtWX)
        se[s] = np.sqrt(np.maximum(np.diag(cov), 0.0))
        ybar = float(w @ y) / tot
        tss = float(w @ (y - ybar) ** 2)
        r2[s] = 1.0 - float(w @ (e * e)) / tss if tss > 0 else 0.0
        df[s] = dof
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    pval = 2.0 * stats.t.sf(np.abs(t), df[:, None])
    return se, t, pval, r2


def em_fit(
    spec: MsSpec | int,
    design,
    response=None,
    restarts: int = 16,
    seed: int = 0,
    max_iter: int = 1000,
    tol: float = 1e-8,
    init: Literal["uniform", "estimate"] = "uniform",
    labels: Sequence[str] | None = None,
) -> MsFit:
    """Maximum-likelihood fit by EM; best of ``restarts`` random initial regime assignments.

    ``design`` may be a :class:`HerdDesign` (response taken from it) or a
    plain matrix.  Regimes come back ordered by descending sigma.
    """
    K = spec.n_regimes if isinstance(spec, MsSpec) else int(spec)
    dates = None
    if isinstance(design, HerdDesign):
        labels = labels or design.labels
        dates = design.dates
        X, y = design.X, design.y if response is None else np.asarray(response, dtype=np.float64)
    else:
        X = np.asarray(design, dtype=np.float64)
        y = np.asarray(response, dtype=np.float64)
    labels = tuple(labels) if labels is not None else tuple(f"x{i}" for i in range(X.shape[1]))
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if init not in ("uniform", "estimate"):
        raise ValueError(f"unknown init mode {init!r}")
    fit_ols(X, y, labels)  # full-rank check on the pooled problem

    children = np.random.SeedSequence(seed).spawn(restarts)
    runs: list[tuple[float, int, _Run]] = []
    lls = []
    traces = []
    n_degenerate = 0
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        try:
            run = _em_run(X, y, K, _initial_resp(X, y, K, rng, r), init, max_iter, tol, dates)
        except _Degenerate as exc:
            logger.info("restart %d discarded: %s", r, exc)
            n_degenerate += 1
            lls.append(float("nan"))
            continue
        runs.append((run.loglik, r, run))
        lls.append(run.loglik)
        traces.append(np.asarray(run.trace))
    if not runs:
        raise DegenerateFit(f"all {restarts} EM restarts were degenerate")
    # ties resolved toward the lower restart index
    best = max(runs, key=lambda t: (t[0], -t[1]))[2]
    se, tstat, pval, r2 = _regime_inference(X, y, best.smoothed, best.beta)
    fit = MsFit(
        beta=best.beta,
        sigma=best.sigma,
        trans=best.trans,
        init=best.init,
        filtered=best.filtered,
        smoothed=best.smoothed,
        loglik=best.loglik,
        se=se,
        tstat=tstat,
        pvalue=pval,
        regime_r2=r2,
        design_labels=labels,
        converged=best.converged,
        n_iter=best.n_iter,
        loglik_trace=np.asarray(best.trace),
        dates=dates,
        restart_logliks=tuple(lls),
        n_degenerate=n_degenerate,
        restart_traces=tuple(traces),
    )
    order = sorted(range(K), key=lambda s: (-fit.sigma[s], s))
    return fit.permute(order)


# ---------------------------------------------------------------------------
# labelling and verdicts
# ---------------------------------------------------------------------------


def label_from_stats(sigma, rm_mean) -> tuple[str, ...]:
    sigma = np.asarray(sigma, dtype=np.float64)
    m = np.asarray(rm_mean, dtype=np.float64)
    K = sigma.shape[0]
    tie = False
    if K != 4:
        order = sorted(range(K), key=lambda s: (-sigma[s], s))
        tie = len(set(sigma.tolist())) < K
        out = [""] * K
        for rank, s in enumerate(order, start=1):
            out[s] = f"regime_{rank}"
    else:
        remaining = list(range(4))
        low = min(remaining, key=lambda s: (sigma[s], s))
        tie |= int(np.sum(sigma == sigma[low])) > 1
        remaining.remove(low)
        high = min(remaining, key=lambda s: (-sigma[s], s))
        tie |= int(np.sum(sigma[remaining] == sigma[high])) > 1
        remaining.remove(high)
        a, b = remaining
        if m[a] == m[b]:
            tie = True
        best, worst = (a, b) if m[a] >= m[b] else (b, a)
        out = [""] * 4
        out[high], out[low], out[best], out[worst] = SEMANTIC_LABELS
    if tie:
        msg = "regime labelling hit ties; broken by regime index (lower index first)"
        logger.warning(msg)
        warnings.warn(msg, RegimeTieWarning, stacklevel=3)
    return tuple(out)


def label_regimes(fit: MsFit, rm) -> RegimeLabeling:
    """Map regimes to volatility / income semantics using sigma and the weighted mean of R_m."""
    rm = np.asarray(rm, dtype=np.float64)
    if rm.shape[0] != fit.smoothed.shape[0]:
        raise ValueError("rm must align with the fitted sample")
    w = fit.smoothed
    m = (w * rm[:, None]).sum(axis=0) / w.sum(axis=0)
    return RegimeLabeling(label_from_stats(fit.sigma, m), m, fit.sigma.copy())


def per_regime_herding(fit: MsFit, alpha: float = 0.05, label: str = RM_SQ) -> list[HerdingVerdict]:
    j = fit.design_labels.index(label)
    return [herding_verdict(fit.beta[s, j], fit.pvalue[s, j], alpha) for s in range(fit.n_regimes)]


def fit_ms(
    disp: DispersionSeries,
    spec: MsSpec = MsSpec(),
    restarts: int = 16,
    seed: int = 0,
    **kw,
) -> MsFit:
    """Design, EM fit and labelling; with four regimes they are ordered as the labels are listed."""
    d = build_design(disp, spec)
    fit = em_fit(spec, d, restarts=restarts, seed=seed, **kw)
    lab = label_regimes(fit, d.rm)
    fit = replace(fit, labels=lab.labels)
    if fit.n_regimes == 4:
        fit = fit.permute([lab.labels.index(name) for name in SEMANTIC_LABELS])
    return fit


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def ms_to_dict(fit: MsFit, alpha: float = 0.05) -> dict:
    verdicts = per_regime_herding(fit, alpha) if RM_SQ in fit.design_labels else []
    regimes = []
    for s in range(fit.n_regimes):
        regimes.append(
            {
                "regime": s + 1,
                "label": fit.labels[s] if fit.labels else f"regime_{s + 1}",
                "sigma": fit.sigma[s],
                "r2": fit.regime_r2[s],
                "expected_duration": 1.0 / (1.0 - fit.trans[s, s]) if fit.trans[s, s] < 1 else None,
                "coefficients": [
                    {"label": lab, "coef": fit.beta[s, j], "se": fit.se[s, j], "t": fit.tstat[s, j], "p": fit.pvalue[s, j]}
                    for j, lab in enumerate(fit.design_labels)
                ],
                "verdict": verdicts[s].verdict if verdicts else None,
            }
        )
    return {
        "n_regimes": fit.n_regimes,
        "loglik": fit.loglik,
        "converged": fit.converged,
        "n_iter": fit.n_iter,
        "nobs": fit.smoothed.shape[0],
        "transition": fit.trans,
        "regimes": regimes,
        "restart_logliks": list(fit.restart_logliks),
        "n_degenerate_restarts": fit.n_degenerate,
        "alpha": alpha,
    }


def write_regime_probs(fit: MsFit, path) -> None:
    K = fit.n_regimes
    ml = fit.most_likely
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *(f"p_regime_{s + 1}" for s in range(K)), "most_likely", "label"])
        for t in range(fit.smoothed.shape[0]):
            date = str(fit.dates[t]) if fit.dates is not None else str(t)
            lab = fit.labels[ml[t]] if fit.labels else f"regime_{ml[t] + 1}"
            w.writerow([date, *(format_float(v) for v in fit.smoothed[t]), int(ml[t]) + 1, lab])


_ROW_ORDER = (CONST, "csad_lag1", "csad_lag2", "csad_lag3", RM_SQ, RM_ABS, VOL_CSAD, VOL_RM)


def render_regime_table(fit: MsFit, ols: OlsFit | None = None, p_digits: int = 3) -> str:
    """OLS column (optional) followed by one column per regime."""
    labels = [lab for lab in _ROW_ORDER if lab in fit.design_labels]
    labels += [lab for lab in fit.design_labels if lab not in labels]
    header = ["Term"] + (["OLS"] if ols is not None else []) + [f"Regime {s + 1}" for s in range(fit.n_regimes)]
    rows = []
    for lab in labels:
        row = [display_name(lab)]
        if ols is not None:
            row.append(report.cell(*ols[lab][::2], p_digits=p_digits) if lab in ols.design_labels else "")
        j = fit.design_labels.index(lab)
        row += [report.cell(fit.beta[s, j], fit.pvalue[s, j], p_digits=p_digits) for s in range(fit.n_regimes)]
        rows.append(row)
    r2 = ["R2"] + ([f"{ols.r2:.3f}"] if ols is not None else []) + [f"{v:.3f}" for v in fit.regime_r2]
    rows.append(r2)
    if fit.labels:
        rows.append(["Label"] + ([""] if ols is not None else []) + list(fit.labels))
    return report.table(
        header,
        rows,
        title="Herding regressions: OLS and Markov-switching regimes",
        note="Values in parentheses are p-values. " + report.STARS_NOTE,
    )
