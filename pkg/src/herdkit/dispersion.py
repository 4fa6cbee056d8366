"""Equal-weighted market return and cross-sectional dispersion (CSAD, CSSD)."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .panel import DatedSeries, ReturnPanel, as_dates, deseasonalize, format_float

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ("date", "n_assets", "rm", "rm_abs", "rm_sq", "csad", "cssd")


@dataclass(frozen=True)
class DispersionSeries:
    dates: np.ndarray
    csad: np.ndarray
    rm: np.ndarray
    n_assets: np.ndarray
    cssd: np.ndarray | None = None

    def __post_init__(self):
        dates = as_dates(self.dates)
        csad = np.asarray(self.csad, dtype=np.float64)
        rm = np.asarray(self.rm, dtype=np.float64)
        n = np.asarray(self.n_assets, dtype=np.int64)
        if not (dates.shape == csad.shape == rm.shape == n.shape):
            raise ValueError("dispersion columns must have equal length")
        if np.any(csad < 0):
            raise ValueError("csad must be >= 0")
        if np.any(n < 2):
            raise ValueError("every retained date needs n_assets >= 2")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "csad", csad)
        object.__setattr__(self, "rm", rm)
        object.__setattr__(self, "n_assets", n)
        if self.cssd is not None:
            cssd = np.asarray(self.cssd, dtype=np.float64)
            if cssd.shape != csad.shape or np.any(cssd < 0):
                raise ValueError("cssd must match csad in length and be >= 0")
            object.__setattr__(self, "cssd", cssd)

    @property
    def rm_abs(self) -> np.ndarray:
        return np.abs(self.rm)

    @property
    def rm_sq(self) -> np.ndarray:
        return self.rm * self.rm

    def __len__(self) -> int:
        return self.csad.shape[0]

    def series(self, column: str) -> DatedSeries:
        values = getattr(self, column)
        if values is None:
            raise ValueError(f"column {column!r} not available")
        return DatedSeries(self.dates, values, column)

    def subset(self, keep: np.ndarray) -> "DispersionSeries":
        return DispersionSeries(
            self.dates[keep],
            self.csad[keep],
            self.rm[keep],
            self.n_assets[keep],
            None if self.cssd is None else self.cssd[keep],
        )


def market_return(panel: ReturnPanel, date, min_assets: int = 2) -> float:
    """Equal-weighted mean of observed returns on one date."""
    idx = np.searchsorted(panel.dates, np.datetime64(str(date), "D"))
    if idx >= panel.dates.size or panel.dates[idx] != np.datetime64(str(date), "D"):
        raise KeyError(f"{date} not in panel")
    obs = panel.observed[idx]
    if obs.sum() < min_assets:
        raise ValueError(f"{date}: only {int(obs.sum())} observed assets (< {min_assets})")
    return float(panel.returns[idx, obs].mean())


def _compute(panel: ReturnPanel, min_assets: int):
    n, rm, csad_v, cssd_v = _kernels.dispersion(
        np.ascontiguousarray(panel.returns), np.ascontiguousarray(panel.observed), min_assets
    )
    keep = n >= min_assets
    dropped = int((~keep).sum())
    if dropped:
        logger.info("dropped %d date(s) with fewer than %d observed assets", dropped, min_assets)
    return DispersionSeries(panel.dates[keep], csad_v[keep], rm[keep], n[keep], cssd_v[keep])


def csad(panel: ReturnPanel, min_assets: int = 2) -> DispersionSeries:
    """Per-date CSAD, market return and cross-section size (CSSD filled too)."""
    return _compute(panel, min_assets)


def cssd(panel: ReturnPanel, min_assets: int = 2) -> DatedSeries:
    disp = _compute(panel, min_assets)
    return DatedSeries(disp.dates, disp.cssd, "cssd")


def deseasonalize_dispersion(disp: DispersionSeries, method: str = "weekday_demean") -> DispersionSeries:
    """Weekday-demean CSAD, CSSD and R_m.

    Adjusted dispersion values that would go negative are clipped at zero.
    """
    if method == "none":
        return disp

    def adj(values, name):
        out = deseasonalize(DatedSeries(disp.dates, values, name), method).values
        neg = int((out < 0).sum())
        if neg and name != "rm":
            logger.warning("deseasonalized %s: clipped %d negative value(s) to 0", name, neg)
            out = np.maximum(out, 0.0)
        return out

    return replace(
        disp,
        csad=adj(disp.csad, "csad"),
        rm=adj(disp.rm, "rm"),
        cssd=None if disp.cssd is None else adj(disp.cssd, "cssd"),
    )


def write_dispersion(disp: DispersionSeries, path) -> None:
    cssd_col = disp.cssd if disp.cssd is not None else np.full(len(disp), np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for i in range(len(disp)):
            w.writerow(
                [
                    str(disp.dates[i]),
                    int(disp.n_assets[i]),
                    format_float(disp.rm[i]),
                    format_float(abs(disp.rm[i])),
                    format_float(disp.rm[i] * disp.rm[i]),
                    format_float(disp.csad[i]),
                    format_float(cssd_col[i]),
                ]
            )


def read_dispersion(path) -> DispersionSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no rows")
    cssd_vals = [r.get("cssd", "") for r in rows]
    has_cssd = all(v != "" for v in cssd_vals)
    return DispersionSeries(
        dates=[r["date"] for r in rows],
        csad=[float(r["csad"]) for r in rows],
        rm=[float(r["rm"]) for r in rows],
        n_assets=[int(r["n_assets"]) for r in rows],
        cssd=[float(v) for v in cssd_vals] if has_cssd else None,
    )
