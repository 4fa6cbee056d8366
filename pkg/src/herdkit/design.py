"""Regressor matrices for the CSAD herding regressions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dispersion import DispersionSeries

CONST = "const"
RM_ABS = "|Rm|"
RM_SQ = "Rm^2"
VOL_CSAD = "vol_csad"
VOL_RM = "vol_rm"
EXOG = "X*Rm^2"


def lag_label(k: int) -> str:
    return f"csad_lag{k}"


_DISPLAY = {
    CONST: "Constant",
    RM_ABS: "|Rm,t|",
    RM_SQ: "R2m,t",
    VOL_CSAD: "Vol CSAD",
    VOL_RM: "Vol Rm,t",
    EXOG: "XR2m,t",
}


def display_name(label: str) -> str:
    if label.startswith("csad_lag"):
        return f"CSAD t-{label[len('csad_lag'):]}"
    return _DISPLAY.get(label, label)


@dataclass(frozen=True)
class HerdDesign:
    X: np.ndarray
    y: np.ndarray
    labels: tuple[str, ...]
    dates: np.ndarray
    rm: np.ndarray

    def __iter__(self):
        # allows ``X, y = herd_design(...)``
        yield self.X
        yield self.y

    @property
    def nobs(self) -> int:
        return self.y.shape[0]


def rolling_std(x: np.ndarray, window: int) -> np.ndarray:
    """Sample std over the ``window`` values strictly before each t (NaN until available)."""
    if window < 2:
        raise ValueError("vol_window must be >= 2")
    return _kernels.rolling_std(np.ascontiguousarray(x, dtype=np.float64), int(window))


def herd_design(
    disp: DispersionSeries,
    n_lags: int = 0,
    vol_window: int | None = None,
    min_rows: int = 10,
) -> HerdDesign:
    """Columns: const, |Rm|, Rm^2, [vol_csad, vol_rm], [csad_lag1..L].

    ``vol_window=None`` disables the volatility columns.  The first
    ``vol_window + n_lags`` rows are dropped.
    """
    if n_lags < 0:
        raise ValueError("n_lags must be >= 0")
    T = len(disp)
    drop = (vol_window or 0) + n_lags
    if T <= drop + min_rows:
        raise ValueError(f"series too short: {T} dates, need more than {drop + min_rows}")
    cols = [np.ones(T), disp.rm_abs, disp.rm_sq]
    labels = [CONST, RM_ABS, RM_SQ]
    if vol_window is not None:
        cols += [rolling_std(disp.csad, vol_window), rolling_std(disp.rm, vol_window)]
        labels += [VOL_CSAD, VOL_RM]
    for k in range(1, n_lags + 1):
        lagged = np.full(T, np.nan)
        lagged[k:] = disp.csad[:-k]
        cols.append(lagged)
        labels.append(lag_label(k))
    X = np.column_stack(cols)[drop:]
    return HerdDesign(
        X=np.ascontiguousarray(X),
        y=disp.csad[drop:].copy(),
        labels=tuple(labels),
        dates=disp.dates[drop:],
        rm=disp.rm[drop:].copy(),
    )
