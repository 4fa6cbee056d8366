"""Text rendering in the usual journal-table style: ``coef*** (p)``."""

from __future__ import annotations

import json
import math
from typing import Iterable, Sequence

import numpy as np

STAR_LEVELS = ((0.01, "***"), (0.05, "**"), (0.10, "*"))
STARS_NOTE = "*, **, *** indicate significance at the 10%, 5% and 1% levels."


def stars(p: float) -> str:
    # Boundary values carry the stronger mark (a p of exactly 0.05 gets **).
    if p is None or not math.isfinite(p):
        return ""
    for level, mark in STAR_LEVELS:
        if p <= level:
            return mark
    return ""


def cell(coef: float, p: float, digits: int = 3, p_digits: int = 3) -> str:
    """'-0.673* (0.090)'."""
    return f"{_num(coef, digits)}{stars(p)} ({_num(p, p_digits)})"


def _num(x, digits):
    if x is None or not math.isfinite(x):
        return "nan" if x is None or math.isnan(x) else ("inf" if x > 0 else "-inf")
    s = f"{x:.{digits}f}"
    # avoid "-0.000"
    if float(s) == 0.0:
        s = s.lstrip("-")
    return s


def table(header: Sequence[str], rows: Iterable[Sequence[str]], title: str = "", note: str = "") -> str:
    rows = [list(map(str, r)) for r in rows]
    header = list(map(str, header))
    widths = [len(h) for h in header]
    for r in rows:
        for i, c in enumerate(r):
            widths[i] = max(widths[i], len(c))
    fmt_row = lambda r: "  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(r))
    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    out = []
    if title:
        out.append(title)
    out += [rule, fmt_row(header), rule]
    out += [fmt_row(r) for r in rows]
    out.append(rule)
    if note:
        out.append(note)
    return "\n".join(out) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.datetime64):
        return str(obj)
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, non-finite floats as null."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"
