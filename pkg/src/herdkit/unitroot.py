"""ADF and Phillips-Perron unit-root tests with tabulated Dickey-Fuller critical values."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Mapping

import numpy as np
from scipy import linalg

from . import _kernels, report

Spec = Literal["constant", "constant_trend"]
LEVELS = (0.01, 0.05, 0.10)

# Fuller's tau tables (t-ratio form), rows T = 25, 50, 100, 250, 500, inf.
_TABLE_T = np.array([25.0, 50.0, 100.0, 250.0, 500.0, np.inf])
_CRIT = {
    "constant": np.array(
        [
            [-3.75, -3.00, -2.63],
            [-3.58, -2.93, -2.60],
            [-3.51, -2.89, -2.58],
            [-3.46, -2.88, -2.57],
            [-3.44, -2.87, -2.57],
            [-3.43, -2.86, -2.57],
        ]
    ),
    "constant_trend": np.array(
        [
            [-4.38, -3.60, -3.24],
            [-4.15, -3.50, -3.18],
            [-4.04, -3.45, -3.15],
            [-3.99, -3.43, -3.13],
            [-3.98, -3.42, -3.13],
            [-3.96, -3.41, -3.12],
        ]
    ),
}


@dataclass(frozen=True)
class UnitRootResult:
    statistic: float
    spec: Spec
    lags_or_bandwidth: int
    crit: dict
    kind: Literal["adf", "pp"]
    nobs: int

    @property
    def decision(self) -> dict:
        return {a: ("reject" if self.statistic < c else "fail_to_reject") for a, c in self.crit.items()}

    def rejects(self, alpha: float) -> bool:
        return self.statistic < self.crit[alpha]

    @property
    def p_bound(self) -> str:
        for a in LEVELS:
            if self.rejects(a):
                return f"p<{a:.2f}"
        return f"p>{LEVELS[-1]:.2f}"

    @property
    def stars(self) -> str:
        for a, mark in ((0.01, "***"), (0.05, "**"), (0.10, "*")):
            if self.rejects(a):
                return mark
        return ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "spec": self.spec,
            "statistic": self.statistic,
            "lags_or_bandwidth": self.lags_or_bandwidth,
            "nobs": self.nobs,
            "crit": {f"{int(a * 100)}%": c for a, c in self.crit.items()},
            "decision": {f"{int(a * 100)}%": d for a, d in self.decision.items()},
            "p_bound": self.p_bound,
        }


def critical_values(nobs: int, spec: Spec) -> dict:
    """Interpolate the tau table linearly in 1/T."""
    tab = _CRIT[spec]
    inv = np.where(np.isinf(_TABLE_T), 0.0, 1.0 / _TABLE_T)[::-1]  # increasing
    x = min(1.0 / max(nobs, 1), inv[-1])
    return {a: float(np.interp(x, inv, tab[::-1, j])) for j, a in enumerate(LEVELS)}


def _check_series(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or not np.all(np.isfinite(y)):
        raise ValueError("series must be a finite 1-d array")
    if np.ptp(y) == 0:
        raise ValueError("series is constant")
    return y


def _df_design(y: np.ndarray, k: int, spec: Spec, start: int):
    """Rows t = start..T-1 (start >= k+1) of the Dickey-Fuller regression."""
    T = y.shape[0]
    dy = np.diff(y)  # dy[t-1] = y_t - y_{t-1}
    t = np.arange(start, T)
    cols = [y[t - 1]]
    for j in range(1, k + 1):
        cols.append(dy[t - 1 - j])
    cols.append(np.ones(t.size))
    if spec == "constant_trend":
        cols.append(t / T)
    elif spec != "constant":
        raise ValueError(f"unknown spec {spec!r}")
    return np.column_stack(cols), dy[t - 1]


def _ols(X, z):
    Q, R = np.linalg.qr(X)
    b = linalg.solve_triangular(R, Q.T @ z)
    u = z - X @ b
    n, k = X.shape
    s2 = float(u @ u) / (n - k)
    R_inv = linalg.solve_triangular(R, np.eye(k))
    se0 = math.sqrt(s2 * float(R_inv[0] @ R_inv[0]))
    return b, u, s2, se0


def schwert_maxlag(T: int) -> int:
    return int(np.floor(12.0 * (T / 100.0) ** 0.25))


def adf(y, spec: Spec = "constant", lags: int | Literal["auto"] = "auto") -> UnitRootResult:
    """Augmented Dickey-Fuller t-test on the lagged level."""
    y = _check_series(y)
    T = y.shape[0]
    if lags == "auto":
        kmax = min(schwert_maxlag(T), max((T - 12) // 3, 0))
        if T <= 10:
            raise ValueError(f"series too short for ADF (T={T})")
        best = None
        for k in range(kmax + 1):
            X, z = _df_design(y, k, spec, kmax + 1)
            _, u, _, _ = _ols(X, z)
            n = z.shape[0]
            aic = n * math.log(float(u @ u) / n) + 2 * X.shape[1]
            if best is None or aic < best[0] - 1e-12:
                best = (aic, k)
        k = best[1]
    else:
        k = int(lags)
        if k < 0:
            raise ValueError("lags must be >= 0")
        if T <= k + 10:
            raise ValueError(f"series too short for ADF with {k} lags (T={T})")
    X, z = _df_design(y, k, spec, k + 1)
    b, _, _, se0 = _ols(X, z)
    stat = b[0] / se0
    n = z.shape[0]
    return UnitRootResult(float(stat), spec, k, critical_values(n, spec), "adf", n)


def newey_west_lrv(residuals, bandwidth: int) -> float:
    """Bartlett-weighted long-run variance, autocovariances normalised by n."""
    u = np.ascontiguousarray(residuals, dtype=np.float64)
    if bandwidth < 0 or bandwidth >= u.shape[0]:
        raise ValueError(f"bandwidth must lie in [0, {u.shape[0]})")
    return float(_kernels.bartlett_lrv(u, int(bandwidth)))


def pp_bandwidth(T: int) -> int:
    return int(np.floor(4.0 * (T / 100.0) ** (2.0 / 9.0)))


def pp(y, spec: Spec = "constant", bandwidth: int | Literal["auto"] = "auto") -> UnitRootResult:
    """Phillips-Perron Z_t: the k=0 DF t-ratio corrected with a Newey-West long-run variance."""
    y = _check_series(y)
    T = y.shape[0]
    if T <= 20:
        raise ValueError(f"series too short for PP (T={T})")
    bw = pp_bandwidth(T) if bandwidth == "auto" else int(bandwidth)
    X, z = _df_design(y, 0, spec, 1)
    b, u, s2, se0 = _ols(X, z)
    n = z.shape[0]
    gamma0 = float(u @ u) / n
    lam2 = newey_west_lrv(u, bw)
    if lam2 <= 0:
        raise ValueError("non-positive long-run variance")
    t = b[0] / se0
    stat = math.sqrt(gamma0 / lam2) * t - 0.5 * (lam2 - gamma0) / math.sqrt(lam2) * n * se0 / math.sqrt(s2)
    return UnitRootResult(float(stat), spec, bw, critical_values(n, spec), "pp", n)


def unit_root_battery(y, adf_lags="auto", pp_bandwidth_="auto") -> dict:
    """ADF and PP under both deterministic specifications."""
    return {
        (kind, spec): (adf(y, spec, adf_lags) if kind == "adf" else pp(y, spec, pp_bandwidth_))
        for kind in ("adf", "pp")
        for spec in ("constant", "constant_trend")
    }


_COLS = (("adf", "constant"), ("adf", "constant_trend"), ("pp", "constant"), ("pp", "constant_trend"))


def render_unit_root_table(results: Mapping[str, dict]) -> str:
    """Rows per variable; ADF/PP x constant/constant+trend columns."""
    header = ["Variable", "ADF const", "ADF const+trend", "PP const", "PP const+trend"]
    rows = []
    for name, cells in results.items():
        row = [name]
        for key in _COLS:
            r = cells[key]
            row.append(f"{report._num(r.statistic, 3)}{r.stars} ({r.p_bound})")
        rows.append(row)
    return report.table(
        header,
        rows,
        title="Unit root tests (H0: unit root)",
        note="Bounds in parentheses from tabulated Dickey-Fuller critical values. " + report.STARS_NOTE,
    )
