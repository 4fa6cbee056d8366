"""Least squares, the static and event-augmented CSAD regressions, and residual diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np
from scipy import linalg, stats

from . import report
from .design import CONST, EXOG, RM_ABS, RM_SQ, display_name, herd_design
from .dispersion import DispersionSeries
from .events import ExogSeries
from .panel import DatedSeries, align

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-10

Verdict = Literal["herding", "no_herding", "anti_herding"]


class RankError(ValueError):
    """Design matrix is (numerically) rank deficient."""


@dataclass(frozen=True, eq=False)
class OlsFit:
    coef: np.ndarray
    se: np.ndarray
    tstat: np.ndarray
    pvalue: np.ndarray
    r2: float
    adj_r2: float
    fstat: float
    f_pvalue: float
    residuals: np.ndarray
    nobs: int
    design_labels: tuple[str, ...]
    design: np.ndarray = field(repr=False)
    response: np.ndarray = field(repr=False)
    sigma2: float = float("nan")
    cov: np.ndarray = field(default=None, repr=False)
    cov_type: str = "nonrobust"
    has_const: bool = True

    @property
    def df_resid(self) -> int:
        return self.nobs - self.coef.shape[0]

    def index(self, label: str) -> int:
        try:
            return self.design_labels.index(label)
        except ValueError:
            raise KeyError(f"no coefficient labelled {label!r}; have {self.design_labels}") from None

    def __getitem__(self, label: str) -> tuple[float, float, float]:
        """(coef, se, pvalue) for one design column."""
        i = self.index(label)
        return float(self.coef[i]), float(self.se[i]), float(self.pvalue[i])


@dataclass(frozen=True)
class DiagnosticResult:
    statistic: float
    pvalue: float
    lags: int
    kind: Literal["breusch_godfrey", "arch"]


@dataclass(frozen=True)
class HerdingVerdict:
    gamma2: float
    pvalue: float
    alpha: float
    verdict: Verdict


@dataclass(frozen=True)
class ActivationVerdict:
    """Does the exogenous term push dispersion down (negative, significant gamma3)?"""

    gamma3: float
    pvalue: float
    alpha: float
    activates: bool

    @property
    def verdict(self) -> str:
        return "activation" if self.activates else "no activation"


def _default_labels(k: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(k))


def check_rank(X: np.ndarray, labels: Sequence[str]) -> None:
    """Raise RankError naming the columns involved in any near-linear dependence."""
    s, vt = np.linalg.svd(X, full_matrices=False)[1:]
    if s.size == 0 or s[0] == 0:
        raise RankError(f"design matrix is all zeros (columns {list(labels)})")
    null = vt[s <= RANK_RTOL * s[0]]
    if null.shape[0]:
        involved = sorted({labels[j] for v in null for j in np.nonzero(np.abs(v) > 1e-6)[0]}, key=labels.index)
        raise RankError(f"design is rank deficient; collinear or zero columns: {involved}")


def _hac_cov(X, u, XtX_inv, lags):
    scores = X * u[:, None]
    S = scores.T @ scores
    for j in range(1, lags + 1):
        w = 1.0 - j / (lags + 1.0)
        G = scores[j:].T @ scores[:-j]
        S += w * (G + G.T)
    return XtX_inv @ S @ XtX_inv


def fit_ols(
    design,
    response,
    labels: Sequence[str] | None = None,
    cov_type: Literal["nonrobust", "hac"] = "nonrobust",
    hac_lags: int | None = None,
) -> OlsFit:
    """Ordinary least squares with classical (or Newey-West) inference."""
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: design {X.shape}, response {y.shape}")
    n, k = X.shape
    labels = tuple(labels) if labels is not None else _default_labels(k)
    if len(labels) != k:
        raise ValueError("one label per design column required")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("design and response must be finite")
    if n <= k:
        raise ValueError(f"need more observations than columns (nobs={n}, ncols={k})")
    check_rank(X, labels)

    Q, R = np.linalg.qr(X)
    coef = linalg.solve_triangular(R, Q.T @ y)
    resid = y - X @ coef
    df = n - k
    rss = float(resid @ resid)
    sigma2 = rss / df
    R_inv = linalg.solve_triangular(R, np.eye(k))
    XtX_inv = R_inv @ R_inv.T
    if cov_type == "nonrobust":
        cov = sigma2 * XtX_inv
    elif cov_type == "hac":
        lags = hac_lags if hac_lags is not None else int(np.floor(4 * (n / 100.0) ** (2.0 / 9.0)))
        cov = _hac_cov(X, resid, XtX_inv, lags)
    else:
        raise ValueError(f"unknown cov_type {cov_type!r}")
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = coef / se
    pvalue = 2.0 * stats.t.sf(np.abs(tstat), df)

    has_const = bool(np.any(np.all(X == X[0], axis=0) & (X[0] != 0)))
    tss = float(((y - y.mean()) ** 2).sum()) if has_const else float(y @ y)
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    r2 = min(max(r2, 0.0), 1.0)
    n_eff = n - 1 if has_const else n
    adj_r2 = 1.0 - (1.0 - r2) * n_eff / df
    df_model = k - 1 if has_const else k
    if df_model > 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            fstat = float((r2 / df_model) / ((1.0 - r2) / df)) if r2 < 1 else float("inf")
        f_pvalue = float(stats.f.sf(fstat, df_model, df))
    else:
        fstat, f_pvalue = float("nan"), float("nan")
    return OlsFit(
        coef=coef,
        se=se,
        tstat=tstat,
        pvalue=pvalue,
        r2=r2,
        adj_r2=adj_r2,
        fstat=fstat,
        f_pvalue=f_pvalue,
        residuals=resid,
        nobs=n,
        design_labels=labels,
        design=X,
        response=y,
        sigma2=sigma2,
        cov=cov,
        cov_type=cov_type,
        has_const=has_const,
    )


# ---------------------------------------------------------------------------
# herding regressions
# ---------------------------------------------------------------------------

MIN_HERD_DATES = 30


def herding_regression(
    disp: DispersionSeries,
    n_lags: int = 0,
    vol_window: int | None = None,
    cov_type: str = "nonrobust",
) -> OlsFit:
    """CSAD on (1, |Rm|, Rm^2), optionally with volatility and lagged-CSAD terms."""
    if len(disp) < MIN_HERD_DATES:
        raise ValueError(f"herding regression needs >= {MIN_HERD_DATES} dates, got {len(disp)}")
    d = herd_design(disp, n_lags=n_lags, vol_window=vol_window)
    return fit_ols(d.X, d.y, d.labels, cov_type=cov_type)


def dynamic_regression(disp: DispersionSeries, vol_window: int = 30, n_lags: int = 3, cov_type="nonrobust") -> OlsFit:
    """The full row set of the regime table, estimated by plain OLS."""
    return herding_regression(disp, n_lags=n_lags, vol_window=vol_window, cov_type=cov_type)


def exog_column(rm: np.ndarray, exog_values: np.ndarray, kind: str, form: str = "auto") -> np.ndarray:
    if form == "auto":
        form = "interaction" if kind == "announcement_dummy" else "squared"
    if form == "interaction":
        return exog_values * rm * rm
    if form == "squared":
        return exog_values * exog_values
    raise ValueError(f"unknown exogenous-term form {form!r}")


def event_regression(
    disp: DispersionSeries,
    exog: ExogSeries,
    form: Literal["auto", "interaction", "squared"] = "auto",
    cov_type: str = "nonrobust",
) -> OlsFit:
    """CSAD on (1, |Rm|, Rm^2, X*Rm^2).

    For announcement dummies the extra column is dummy * Rm^2; for index
    returns it defaults to the squared index return (``form="interaction"``
    gives return * Rm^2 instead).
    """
    csad_s, x_s = align(disp.series("csad"), DatedSeries(exog.dates, exog.values, exog.label))
    keep = np.isin(disp.dates, csad_s.dates)
    sub = disp.subset(keep)
    if len(sub) < MIN_HERD_DATES:
        raise ValueError(f"event regression needs >= {MIN_HERD_DATES} aligned dates, got {len(sub)}")
    col = exog_column(sub.rm, x_s.values, exog.kind, form)
    if not np.any(col != 0):
        raise RankError(
            f"exogenous column for {exog.label!r} is identically zero on the {len(sub)} aligned dates "
            "(no events fall inside the sample?)"
        )
    X = np.column_stack([np.ones(len(sub)), sub.rm_abs, sub.rm_sq, col])
    return fit_ols(X, sub.csad, (CONST, RM_ABS, RM_SQ, EXOG), cov_type=cov_type)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def _aux_r2(X, y) -> float:
    tss = float(((y - y.mean()) ** 2).sum())
    if tss <= 0:
        return 0.0
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    e = y - X @ coef
    return max(0.0, 1.0 - float(e @ e) / tss)


def breusch_godfrey(fit: OlsFit, lags: int = 2) -> DiagnosticResult:
    """LM test for residual autocorrelation up to order ``lags``."""
    if lags < 1:
        raise ValueError("lags must be >= 1")
    n, k = fit.design.shape
    if n <= k + lags:
        raise ValueError(f"insufficient observations for BG test (nobs={n}, ncols={k}, lags={lags})")
    u = fit.residuals
    lagged = np.zeros((n, lags))
    for j in range(1, lags + 1):
        lagged[j:, j - 1] = u[:-j]
    stat = n * _aux_r2(np.column_stack([fit.design, lagged]), u)
    return DiagnosticResult(stat, float(stats.chi2.sf(stat, lags)) if stat > 0 else 1.0, lags, "breusch_godfrey")


def arch_test(residuals, lags: int = 1) -> DiagnosticResult:
    """Engle's LM test: squared residuals on a constant and their own lags."""
    u = np.asarray(residuals, dtype=np.float64)
    if lags < 1:
        raise ValueError("lags must be >= 1")
    if u.shape[0] <= lags + 2:
        raise ValueError(f"insufficient observations for ARCH test (n={u.shape[0]}, lags={lags})")
    e = u * u
    y = e[lags:]
    X = np.column_stack([np.ones(y.shape[0])] + [e[lags - j : -j] for j in range(1, lags + 1)])
    stat = y.shape[0] * _aux_r2(X, y)
    return DiagnosticResult(stat, float(stats.chi2.sf(stat, lags)) if stat > 0 else 1.0, lags, "arch")


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


def herding_verdict(gamma2: float, pvalue: float, alpha: float = 0.05) -> HerdingVerdict:
    if pvalue < alpha and gamma2 < 0:
        v = "herding"
    elif pvalue < alpha and gamma2 > 0:
        v = "anti_herding"
    else:
        v = "no_herding"
    return HerdingVerdict(float(gamma2), float(pvalue), float(alpha), v)


def classify_herding(fit: OlsFit, alpha: float = 0.05, label: str = RM_SQ) -> HerdingVerdict:
    coef, _, p = fit[label]
    return herding_verdict(coef, p, alpha)


def classify_activation(fit: OlsFit, alpha: float = 0.05, label: str = EXOG) -> ActivationVerdict:
    coef, _, p = fit[label]
    return ActivationVerdict(coef, p, float(alpha), bool(coef < 0 and p < alpha))


# ---------------------------------------------------------------------------
# serialization / rendering
# ---------------------------------------------------------------------------


def diagnostic_dict(d: DiagnosticResult) -> dict:
    return {"kind": d.kind, "statistic": d.statistic, "pvalue": d.pvalue, "lags": d.lags}


def fit_to_dict(fit: OlsFit, diagnostics: Sequence[DiagnosticResult] = (), extra: Mapping | None = None) -> dict:
    out = {
        "coefficients": [
            {"label": lab, "coef": fit.coef[i], "se": fit.se[i], "t": fit.tstat[i], "p": fit.pvalue[i]}
            for i, lab in enumerate(fit.design_labels)
        ],
        "scalars": {
            "r2": fit.r2,
            "adj_r2": fit.adj_r2,
            "f": fit.fstat,
            "f_p": fit.f_pvalue,
            "nobs": fit.nobs,
            "cov_type": fit.cov_type,
        },
        "diagnostics": {d.kind: diagnostic_dict(d) for d in diagnostics},
    }
    if extra:
        out.update(extra)
    return out


def render_fit_table(
    columns: Mapping[str, tuple[OlsFit, Sequence[DiagnosticResult]]],
    title: str = "",
    p_digits: int = 2,
) -> str:
    """One column per fitted regression: coefficients, corrected R2, F, BG and ARCH rows."""
    names = list(columns)
    labels: list[str] = []
    for fit, _ in columns.values():
        for lab in fit.design_labels:
            if lab not in labels:
                labels.append(lab)
    rows = []
    for lab in labels:
        row = [display_name(lab)]
        for n in names:
            fit = columns[n][0]
            row.append(report.cell(*fit[lab][::2], p_digits=p_digits) if lab in fit.design_labels else "")
        rows.append(row)
    rows.append(["Corrected R2"] + [f"{columns[n][0].adj_r2:.3f}" for n in names])
    rows.append(["F statistics"] + [report.cell(columns[n][0].fstat, columns[n][0].f_pvalue, p_digits=p_digits) for n in names])
    for kind, title_ in (("breusch_godfrey", "Breusch-Godfrey LM"), ("arch", "ARCH LM")):
        row = [title_]
        for n in names:
            d = {x.kind: x for x in columns[n][1]}.get(kind)
            row.append(f"{d.statistic:.3f} ({d.pvalue:.{p_digits}f})" if d else "")
        rows.append(row)
    return report.table(["Variables", *names], rows, title=title, note="Values in parentheses are p-values. " + report.STARS_NOTE)
