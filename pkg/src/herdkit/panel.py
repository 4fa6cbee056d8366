"""Price ingestion, return computation, weekday deseasonalization and date alignment."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ReturnMethod = Literal["simple", "log"]
SeasonalMethod = Literal["none", "weekday_demean"]


def as_dates(values) -> np.ndarray:
    """Coerce ISO strings / dates / datetime64 to a ``datetime64[D]`` array."""
    arr = np.asarray(values)
    if arr.dtype.kind == "M":
        return arr.astype("datetime64[D]")
    return np.array([np.datetime64(str(v), "D") for v in arr], dtype="datetime64[D]")


def _check_increasing(dates: np.ndarray, what: str) -> None:
    if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
        raise ValueError(f"{what}: dates must be strictly increasing with no duplicates")


@dataclass(frozen=True)
class DatedSeries:
    """A named float series indexed by calendar dates."""

    dates: np.ndarray
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        dates = as_dates(self.dates)
        values = np.asarray(self.values, dtype=np.float64)
        if dates.shape != values.shape or values.ndim != 1:
            raise ValueError("dates and values must be 1-d and of equal length")
        _check_increasing(dates, f"series {self.name!r}")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SeriesSpec:
    return_method: ReturnMethod = "simple"
    min_assets_per_date: int = 2
    deseasonalize: SeasonalMethod = "none"

    def __post_init__(self):
        if self.return_method not in ("simple", "log"):
            raise ValueError(f"unknown return_method {self.return_method!r}")
        if self.deseasonalize not in ("none", "weekday_demean"):
            raise ValueError(f"unknown deseasonalize method {self.deseasonalize!r}")
        if self.min_assets_per_date < 2:
            raise ValueError("min_assets_per_date must be >= 2")


@dataclass(frozen=True)
class PricePanel:
    """Date-by-asset closing prices; unobserved cells are NaN with mask False."""

    dates: np.ndarray
    assets: tuple[str, ...]
    prices: np.ndarray
    observed: np.ndarray | None = None
    rejected: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        dates = as_dates(self.dates)
        prices = np.asarray(self.prices, dtype=np.float64)
        observed = np.isfinite(prices) if self.observed is None else np.asarray(self.observed, dtype=bool)
        assets = tuple(str(a) for a in self.assets)
        if prices.shape != (dates.size, len(assets)) or observed.shape != prices.shape:
            raise ValueError("prices/observed shape must be (n_dates, n_assets)")
        if len(assets) < 2:
            raise ValueError(f"need at least 2 assets, got {len(assets)}")
        # Returns need two dates; longer minimums are enforced where they matter.
        if dates.size < 2:
            raise ValueError(f"need at least 2 dates, got {dates.size}")
        _check_increasing(dates, "price panel")
        if np.any(prices[observed] <= 0) or not np.all(np.isfinite(prices[observed])):
            raise ValueError("observed prices must be finite and > 0")
        prices = np.where(observed, prices, np.nan)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "observed", observed)
        object.__setattr__(self, "assets", assets)

    @property
    def shape(self) -> tuple[int, int]:
        return self.prices.shape


@dataclass(frozen=True)
class ReturnPanel:
    """Date-by-asset returns. Row t is the return from price date t-1 to t."""

    dates: np.ndarray
    assets: tuple[str, ...]
    returns: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        dates = as_dates(self.dates)
        returns = np.asarray(self.returns, dtype=np.float64)
        observed = np.asarray(self.observed, dtype=bool)
        if returns.shape != (dates.size, len(self.assets)) or observed.shape != returns.shape:
            raise ValueError("returns/observed shape must be (n_dates, n_assets)")
        _check_increasing(dates, "return panel")
        if np.any(returns[observed] <= -1.0):
            raise ValueError("simple returns must exceed -1")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", np.where(observed, returns, np.nan))
        object.__setattr__(self, "observed", observed)
        object.__setattr__(self, "assets", tuple(str(a) for a in self.assets))

    @property
    def shape(self) -> tuple[int, int]:
        return self.returns.shape


# ---------------------------------------------------------------------------
# delimited tables
# ---------------------------------------------------------------------------


def _sniff_delimiter(header: str) -> str:
    return "\t" if header.count("\t") > header.count(",") else ","


def read_table(source, min_value_columns: int = 1):
    """Parse a dated numeric table.

    Returns ``(dates, column_names, values)`` where ``values`` is a float
    matrix with NaN for blank or unparseable cells.
    """
    text = Path(source).read_text() if not isinstance(source, io.TextIOBase) else source.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{source}: empty table")
    delim = _sniff_delimiter(lines[0])
    rows = list(csv.reader(lines, delimiter=delim))
    header = [h.strip() for h in rows[0]]
    names = header[1:]
    if len(names) < min_value_columns:
        raise ValueError(
            f"{source}: need at least {min_value_columns} value column(s), got {len(names)}"
        )
    dates = []
    bad = []
    values = np.full((len(rows) - 1, len(names)), np.nan)
    for r, row in enumerate(rows[1:]):
        try:
            dates.append(np.datetime64(row[0].strip(), "D"))
        except ValueError as exc:
            raise ValueError(f"{source}: malformed date {row[0]!r} on line {r + 2}") from exc
        for c, cell in enumerate(row[1 : len(names) + 1]):
            cell = cell.strip()
            if not cell:
                continue
            try:
                values[r, c] = float(cell.replace("−", "-"))
            except ValueError:
                bad.append(f"{cell!r} at {row[0]}/{names[c]}")
    if bad:
        more = f" (and {len(bad) - 3} more)" if len(bad) > 3 else ""
        logger.warning("%s: %d unparseable cell(s) read as missing: %s%s", source, len(bad), ", ".join(bad[:3]), more)
    return np.array(dates, dtype="datetime64[D]"), names, values


def load_prices(source, format: str = "wide") -> PricePanel:
    """Load a wide price table: ISO date column followed by one column per asset.

    Rows containing a non-positive price are dropped whole and reported in
    ``PricePanel.rejected``.
    """
    if format != "wide":
        raise ValueError(f"unsupported price table layout {format!r}")
    dates, names, values = read_table(source, min_value_columns=2)
    bad = np.isfinite(values) & (values <= 0)
    rejected = []
    keep = np.ones(dates.size, dtype=bool)
    for r, c in zip(*np.nonzero(bad)):
        rejected.append(f"{dates[r]} {names[c]}: non-positive price {values[r, c]!r}")
        keep[r] = False
    for msg in rejected:
        logger.warning("rejected row: %s", msg)
    if dates.size:
        order = np.argsort(dates, kind="stable")
        if not np.array_equal(order, np.arange(dates.size)):
            raise ValueError(f"{source}: dates must be sorted ascending")
    values = values[keep]
    return PricePanel(
        dates=dates[keep],
        assets=tuple(names),
        prices=values,
        observed=np.isfinite(values),
        rejected=tuple(rejected),
    )


def format_float(x: float) -> str:
    """Shortest round-trip text for a float; empty for NaN."""
    return "" if not np.isfinite(x) else repr(float(x))


def write_table(path, dates, names: Sequence[str], values: np.ndarray, date_header="date") -> None:
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([date_header, *names])
        for d, row in zip(as_dates(dates), values):
            w.writerow([str(d), *(format_float(v) for v in row)])


def write_prices(panel: PricePanel, path) -> None:
    write_table(path, panel.dates, panel.assets, panel.prices)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def compute_returns(panel: PricePanel, spec: SeriesSpec = SeriesSpec()) -> ReturnPanel:
    """Per-asset period returns; a return needs both adjacent prices observed."""
    p = panel.prices
    obs = panel.observed[1:] & panel.observed[:-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        if spec.return_method == "simple":
            r = (p[1:] - p[:-1]) / p[:-1]
        else:
            r = np.log(p[1:] / p[:-1])
    return ReturnPanel(dates=panel.dates[1:], assets=panel.assets, returns=r, observed=obs)


def weekday(dates: np.ndarray) -> np.ndarray:
    """Monday=0 .. Sunday=6."""
    return ((as_dates(dates).astype(np.int64) + 3) % 7).astype(np.int64)


def deseasonalize(series: DatedSeries, method: SeasonalMethod = "weekday_demean") -> DatedSeries:
    """Remove weekday means, keeping the grand mean."""
    if method == "none":
        return series
    if method != "weekday_demean":
        raise ValueError(f"unknown deseasonalize method {method!r}")
    wd = weekday(series.dates)
    counts = np.bincount(wd, minlength=7)
    thin = [int(d) for d in np.nonzero((counts > 0) & (counts < 2))[0]]
    if thin:
        names = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]
        raise ValueError(
            "weekday_demean needs >= 2 observations per weekday; too few for "
            + ", ".join(names[d] for d in thin)
        )
    sums = np.bincount(wd, weights=series.values, minlength=7)
    means = np.divide(sums, counts, out=np.zeros(7), where=counts > 0)
    grand = series.values.mean()
    return DatedSeries(series.dates, series.values - means[wd] + grand, series.name)


def align(left: DatedSeries, right: DatedSeries) -> tuple[DatedSeries, DatedSeries]:
    """Inner join on dates."""
    common, li, ri = np.intersect1d(left.dates, right.dates, assume_unique=True, return_indices=True)
    if common.size == 0:
        def span(s):
            return f"{s.dates[0]}..{s.dates[-1]}" if len(s) else "<empty>"

        raise ValueError(
            f"no common dates between {left.name or 'left'} ({span(left)}) "
            f"and {right.name or 'right'} ({span(right)})"
        )
    return (
        DatedSeries(common, left.values[li], left.name),
        DatedSeries(common, right.values[ri], right.name),
    )
