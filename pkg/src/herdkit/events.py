"""Exogenous regressors: central-bank announcement dummies and index/gold returns."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

from .panel import DatedSeries, as_dates, read_table

logger = logging.getLogger(__name__)

AUTHORITIES = ("FOMC", "ECB", "BOJ")
ACTIONS = ("hike", "cut", "hold")

# column name -> (authority, actions)
PRESETS: dict[str, tuple[str, frozenset[str]]] = {
    "FOMC(+)": ("FOMC", frozenset({"hike"})),
    "ECB(-)": ("ECB", frozenset({"cut"})),
    "BOJ(-)": ("BOJ", frozenset({"cut"})),
    "FOMC(No change)": ("FOMC", frozenset({"hold"})),
    "ECB(No change)": ("ECB", frozenset({"hold"})),
    "BOJ(No change)": ("BOJ", frozenset({"hold"})),
}


@dataclass(frozen=True)
class Announcement:
    date: np.datetime64
    authority: str
    action: str


@dataclass(frozen=True)
class AnnouncementCalendar:
    entries: tuple[Announcement, ...]
    rejected: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            key = (e.date, e.authority)
            if key in seen:
                raise ValueError(f"duplicate announcement for {e.authority} on {e.date}")
            seen.add(key)
            if e.authority not in AUTHORITIES or e.action not in ACTIONS:
                raise ValueError(f"invalid entry {e}")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ExogSeries:
    dates: np.ndarray
    values: np.ndarray
    kind: Literal["announcement_dummy", "index_return"]
    label: str
    rolled: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        dates = as_dates(self.dates)
        values = np.asarray(self.values, dtype=np.float64)
        if dates.shape != values.shape:
            raise ValueError("dates and values must have equal length")
        if self.kind == "announcement_dummy" and not np.all((values == 0) | (values == 1)):
            raise ValueError("announcement dummy values must be 0 or 1")
        if self.kind not in ("announcement_dummy", "index_return"):
            raise ValueError(f"unknown exogenous kind {self.kind!r}")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)


def load_calendar(source) -> AnnouncementCalendar:
    """Read ``date,authority,action`` rows; bad vocabulary rows are skipped and reported."""
    text = Path(source).read_text()
    rows = [r for r in csv.reader(text.splitlines()) if any(c.strip() for c in r)]
    if len(rows) < 2:
        raise ValueError(f"{source}: calendar is empty")
    header = [h.strip().lower() for h in rows[0]]
    try:
        di, ai, ci = header.index("date"), header.index("authority"), header.index("action")
    except ValueError:
        raise ValueError(f"{source}: header must contain date, authority, action") from None
    entries, rejected = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        date_s, auth, act = row[di].strip(), row[ai].strip().upper(), row[ci].strip().lower()
        try:
            date = np.datetime64(date_s, "D")
        except ValueError:
            rejected.append(f"line {lineno}: malformed date {date_s!r}")
            continue
        if auth not in AUTHORITIES:
            rejected.append(f"line {lineno}: unknown authority {row[ai].strip()!r}")
            continue
        if act not in ACTIONS:
            rejected.append(f"line {lineno}: unknown action {row[ci].strip()!r}")
            continue
        entries.append(Announcement(date, auth, act))
    for msg in rejected:
        logger.warning("calendar row rejected: %s", msg)
    entries.sort(key=lambda e: (e.date, e.authority))
    return AnnouncementCalendar(tuple(entries), tuple(rejected))


def to_dummy(
    cal: AnnouncementCalendar,
    authority: str,
    actions: Iterable[str],
    dates,
    window: int = 0,
    label: str | None = None,
) -> ExogSeries:
    """1 on target dates where ``authority`` took one of ``actions``.

    Announcements on dates missing from ``dates`` roll forward to the next
    target date.  ``window`` extends each mark over that many following
    target dates.
    """
    dates = as_dates(dates)
    if dates.size == 0:
        raise ValueError("target calendar is empty")
    actions = frozenset(actions)
    values = np.zeros(dates.size)
    rolled = []
    for e in cal.entries:
        if e.authority != authority or e.action not in actions:
            continue
        i = int(np.searchsorted(dates, e.date))
        if i >= dates.size:
            logger.info("%s %s on %s falls after the sample; ignored", e.authority, e.action, e.date)
            continue
        if dates[i] != e.date:
            if i == 0 and e.date < dates[0]:
                logger.info("%s %s on %s precedes the sample; ignored", e.authority, e.action, e.date)
                continue
            msg = f"{e.authority} {e.action} {e.date} -> {dates[i]}"
            rolled.append(msg)
            logger.info("rolled announcement forward: %s", msg)
        values[i : i + window + 1] = 1.0
    label = label or f"{authority} {'/'.join(sorted(actions)) or 'none'}"
    if not values.any():
        logger.warning("dummy %r is all zero; a regression on it will be rejected", label)
    return ExogSeries(dates, values, "announcement_dummy", label, tuple(rolled))


def preset_dummy(cal: AnnouncementCalendar, preset: str, dates, window: int = 0) -> ExogSeries:
    authority, actions = PRESETS[preset]
    return to_dummy(cal, authority, actions, dates, window=window, label=preset)


def index_returns(levels: DatedSeries, label: str | None = None) -> ExogSeries:
    """Simple percent-difference returns of a positive level series."""
    v = levels.values
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise ValueError(f"index levels for {levels.name or label!r} must be finite and > 0")
    r = (v[1:] - v[:-1]) / v[:-1]
    return ExogSeries(levels.dates[1:], r, "index_return", label or levels.name or "index")


def load_index_levels(source) -> list[DatedSeries]:
    """One DatedSeries per value column; blank cells are dropped per column."""
    dates, names, values = read_table(source, min_value_columns=1)
    out = []
    for j, name in enumerate(names):
        ok = np.isfinite(values[:, j])
        out.append(DatedSeries(dates[ok], values[ok, j], name))
    return out
