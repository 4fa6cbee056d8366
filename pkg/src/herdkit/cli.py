"""Command-line batch runner: prices -> dispersion -> tests -> report files.

Every subcommand reads inputs named in a JSON config file and/or flags
(flags win), writes data files under ``--out`` and sends diagnostics to
stderr.  Exit status: 0 ok, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import dispersion, events, msherd, regress, report, synth, unitroot
from .panel import SeriesSpec, compute_returns, load_prices, write_table

logger = logging.getLogger("herdkit")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    prices: str | None = None
    calendar: str | None = None
    index: tuple[str, ...] = ()
    out: str = "out"
    seed: int = 0
    alpha: float = 0.05
    return_method: str = "simple"
    min_assets: int = 2
    deseasonalize: str = "none"
    bg_lags: int = 2
    arch_lags: int = 1
    # ols mode; "dynamic" adds three CSAD lags and 30-period volatility terms
    ols_design: str = "static"
    n_lags: int = 0
    vol_window: int | None = None
    # ms mode
    n_regimes: int = 4
    ms_lags: int = 3
    ms_vol_window: int | None = 30
    restarts: int = 16
    max_iter: int = 1000
    tol: float = 1e-8
    # event mode
    presets: tuple[str, ...] = tuple(events.PRESETS)
    event_window: int = 0
    index_form: str = "auto"
    # simulate
    synth: dict = field(default_factory=dict)

    @property
    def series_spec(self) -> SeriesSpec:
        return SeriesSpec(self.return_method, self.min_assets, self.deseasonalize)

    @property
    def ms_spec(self) -> msherd.MsSpec:
        return msherd.MsSpec(self.n_regimes, self.ms_lags, self.ms_vol_window)

    @classmethod
    def build(cls, file_values: dict, overrides: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(file_values) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged = {**file_values, **{k: v for k, v in overrides.items() if v is not None}}
        for key in ("index", "presets"):
            if key in merged:
                v = merged[key]
                merged[key] = (v,) if isinstance(v, str) else tuple(v)
        for key in ("vol_window", "ms_vol_window"):
            if merged.get(key) == 0:  # 0 switches the volatility terms off
                merged[key] = None
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for name in ("prices", "calendar"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise UsageError(f"{name} file not found: {p}")
        for p in self.index:
            if not Path(p).is_file():
                raise UsageError(f"index file not found: {p}")
        bad = [p for p in self.presets if p not in events.PRESETS]
        if bad:
            raise UsageError(f"unknown event presets {bad}; choose from {list(events.PRESETS)}")
        if self.ols_design not in ("static", "dynamic"):
            raise UsageError(f"unknown ols_design {self.ols_design!r}; choose static or dynamic")
        if not 0 < self.alpha < 1:
            raise UsageError("alpha must lie in (0, 1)")

    def require(self, *names: str) -> None:
        missing = [n for n in names if not getattr(self, n)]
        if missing:
            raise UsageError(f"missing required input(s): {', '.join('--' + m for m in missing)}")


# ---------------------------------------------------------------------------
# pipeline pieces (pure: return file name -> text)
# ---------------------------------------------------------------------------


def load_dispersion(cfg: RunConfig) -> dispersion.DispersionSeries:
    spec = cfg.series_spec
    panel = load_prices(cfg.prices)
    for msg in panel.rejected:
        logger.warning("%s", msg)
    disp = dispersion.csad(compute_returns(panel, spec), spec.min_assets_per_date)
    if spec.deseasonalize != "none":
        disp = dispersion.deseasonalize_dispersion(disp, spec.deseasonalize)
    return disp


def _exog_series(cfg: RunConfig, dates) -> list[events.ExogSeries]:
    out = []
    if cfg.calendar:
        cal = events.load_calendar(cfg.calendar)
        out += [events.preset_dummy(cal, p, dates, window=cfg.event_window) for p in cfg.presets]
    for path in cfg.index:
        out += [events.index_returns(levels) for levels in events.load_index_levels(path)]
    return out


def _summary(disp: dispersion.DispersionSeries) -> dict:
    def stats(x):
        return {"mean": float(x.mean()), "sd": float(x.std(ddof=1)), "min": float(x.min()), "max": float(x.max())}

    return {
        "nobs": len(disp),
        "first_date": str(disp.dates[0]),
        "last_date": str(disp.dates[-1]),
        "n_assets": {"min": int(disp.n_assets.min()), "max": int(disp.n_assets.max())},
        "csad": stats(disp.csad),
        "rm": stats(disp.rm),
    }


def run_dispersion(cfg: RunConfig) -> dict[str, str]:
    cfg.require("prices")
    disp = load_dispersion(cfg)
    out = {"dispersion.csv": _table_text(lambda p: dispersion.write_dispersion(disp, p))}
    out["dispersion_summary.json"] = report.dumps(_summary(disp))
    return out


def run_unitroot(cfg: RunConfig) -> dict[str, str]:
    cfg.require("prices")
    disp = load_dispersion(cfg)
    variables = {"CSAD": disp.csad, "Rm": disp.rm, "Rm^2": disp.rm_sq}
    for ex in _exog_series(cfg, disp.dates):
        variables[ex.label] = ex.values
    results, payload = {}, {}
    for name, y in variables.items():
        try:
            results[name] = unitroot.unit_root_battery(y)
        except ValueError as exc:
            logger.warning("unit-root tests skipped for %s: %s", name, exc)
            continue
        payload[name] = {f"{k}_{s}": r.to_dict() for (k, s), r in results[name].items()}
    if not results:
        raise ValueError("no series could be tested")
    return {"unitroot.json": report.dumps(payload), "unitroot.txt": unitroot.render_unit_root_table(results)}


def _diagnostics(fit, cfg: RunConfig):
    return [regress.breusch_godfrey(fit, cfg.bg_lags), regress.arch_test(fit.residuals, cfg.arch_lags)]


def run_herd_ols(cfg: RunConfig) -> dict[str, str]:
    cfg.require("prices")
    disp = load_dispersion(cfg)
    if cfg.ols_design == "dynamic":
        fit = regress.dynamic_regression(disp)
    else:
        fit = regress.herding_regression(disp, n_lags=cfg.n_lags, vol_window=cfg.vol_window)
    diags = _diagnostics(fit, cfg)
    v = regress.classify_herding(fit, cfg.alpha)
    payload = regress.fit_to_dict(fit, diags, {"verdict": v.verdict, "alpha": cfg.alpha})
    text = regress.render_fit_table({"OLS": (fit, diags)}, title="Static herding regression", p_digits=3)
    text += f"\nVerdict (alpha={cfg.alpha:g}): {v.verdict}\n"
    return {"herd_ols.json": report.dumps(payload), "herd_ols.txt": text}


def run_herd_ms(cfg: RunConfig) -> dict[str, str]:
    cfg.require("prices")
    disp = load_dispersion(cfg)
    spec = cfg.ms_spec
    fit = msherd.fit_ms(disp, spec, restarts=cfg.restarts, seed=cfg.seed, max_iter=cfg.max_iter, tol=cfg.tol)
    ols = regress.herding_regression(disp, n_lags=spec.n_lags, vol_window=spec.vol_window)
    payload = {
        "ms": msherd.ms_to_dict(fit, cfg.alpha),
        "ols": regress.fit_to_dict(ols, _diagnostics(ols, cfg), {"verdict": regress.classify_herding(ols, cfg.alpha).verdict}),
        "seed": cfg.seed,
    }
    verdicts = msherd.per_regime_herding(fit, cfg.alpha)
    text = msherd.render_regime_table(fit, ols)
    text += "\n" + "\n".join(f"Regime {s + 1} ({fit.labels[s]}): {v.verdict}" for s, v in enumerate(verdicts)) + "\n"
    return {
        "herd_ms.json": report.dumps(payload),
        "herd_ms.txt": text,
        "regime_probs.csv": _table_text(lambda p: msherd.write_regime_probs(fit, p)),
    }


def run_herd_event(cfg: RunConfig) -> dict[str, str]:
    cfg.require("prices")
    if not cfg.calendar and not cfg.index:
        raise UsageError("event mode needs --calendar and/or --index")
    disp = load_dispersion(cfg)
    columns, payload = {"announcement_dummy": {}, "index_return": {}}, {}
    for ex in _exog_series(cfg, disp.dates):
        try:
            fit = regress.event_regression(disp, ex, form=cfg.index_form if ex.kind == "index_return" else "auto")
        except (regress.RankError, ValueError) as exc:
            logger.warning("event regression skipped for %s: %s", ex.label, exc)
            payload[ex.label] = {"skipped": str(exc)}
            continue
        diags = _diagnostics(fit, cfg)
        v = regress.classify_activation(fit, cfg.alpha)
        columns[ex.kind][ex.label] = (fit, diags)
        payload[ex.label] = regress.fit_to_dict(fit, diags, {"kind": ex.kind, "verdict": v.verdict, "alpha": cfg.alpha})
    if not any(columns.values()):
        raise ValueError("no exogenous series produced a usable regression")
    parts = []
    for kind, title in (("announcement_dummy", "Announcement effects"), ("index_return", "Index return effects")):
        if columns[kind]:
            parts.append(regress.render_fit_table(columns[kind], title=title))
            parts.append("\n".join(f"{name}: {payload[name]['verdict']}" for name in columns[kind]) + "\n")
    return {"herd_event.json": report.dumps(payload), "herd_event.txt": "\n".join(parts)}


def run_simulate(cfg: RunConfig) -> dict[str, str]:
    params = {**cfg.synth, "seed": cfg.seed}
    config = synth.SynthConfig.from_dict(params)
    panel, truth = synth.simulate(config)
    dates, prices = synth.prices_from_returns(panel)
    T = config.n_periods
    truth_cols = np.column_stack([truth.path + 1, truth.disp.rm, truth.target_csad])
    return {
        "prices.csv": _table_text(lambda p: write_table(p, dates, panel.assets, prices)),
        "truth.csv": _table_text(lambda p: write_table(p, truth.disp.dates, ("regime", "rm", "csad"), truth_cols)),
        "truth.json": report.dumps({"config": config.to_dict(), "n_periods": T, "floored": truth.floored}),
    }


def _table_text(write) -> str:
    """Capture what a path-based writer produces, so files match the library writers exactly."""
    with tempfile.TemporaryDirectory() as tmp:
        p = Path(tmp) / "table"
        write(p)
        return p.read_text()


COMMANDS = {
    "dispersion": run_dispersion,
    "unitroot": run_unitroot,
    "simulate": run_simulate,
}
HERD_MODES = {"ols": run_herd_ols, "ms": run_herd_ms, "event": run_herd_event}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of RunConfig values")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--prices", help="wide price table: date column then one column per asset")
    common.add_argument("--alpha", type=float)
    common.add_argument("--return-method", dest="return_method", choices=("simple", "log"))
    common.add_argument("--min-assets", dest="min_assets", type=int)
    common.add_argument("--deseasonalize", choices=("none", "weekday_demean"))
    common.add_argument("--calendar", help="announcement calendar: date,authority,action")
    common.add_argument("--index", action="append", help="index level table (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="herdkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("dispersion", parents=[common], help="CSAD / CSSD table")
    sub.add_parser("unitroot", parents=[common], help="ADF and PP over CSAD, Rm, Rm^2 and exogenous series")
    h = sub.add_parser("herd", parents=[common], help="herding regressions")
    h.add_argument("--mode", choices=tuple(HERD_MODES), default="ols")
    h.add_argument("--ols-design", dest="ols_design", choices=("static", "dynamic"))
    h.add_argument("--n-lags", dest="n_lags", type=int)
    h.add_argument("--vol-window", dest="vol_window", type=int, help="0 disables the volatility terms")
    h.add_argument("--regimes", dest="n_regimes", type=int)
    h.add_argument("--ms-lags", dest="ms_lags", type=int)
    h.add_argument("--ms-vol-window", dest="ms_vol_window", type=int, help="0 disables the volatility terms")
    h.add_argument("--restarts", type=int)
    h.add_argument("--max-iter", dest="max_iter", type=int)
    h.add_argument("--preset", dest="presets", action="append", help="announcement column preset (repeatable)")
    h.add_argument("--event-window", dest="event_window", type=int)
    h.add_argument("--index-form", dest="index_form", choices=("auto", "interaction", "squared"))
    sub.add_parser("simulate", parents=[common], help="synthetic price panel with planted regimes")
    return p


_NOT_CONFIG = {"command", "config", "mode", "verbose"}


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.captureWarnings(True)
    try:
        file_values = {}
        if args.config:
            try:
                file_values = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read config {args.config}: {exc}") from None
            if not isinstance(file_values, dict):
                raise UsageError("config file must hold a JSON object")
        overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
        cfg = RunConfig.build(file_values, overrides)
        fn = HERD_MODES[args.mode] if args.command == "herd" else COMMANDS[args.command]
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            outputs = fn(cfg)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in outputs.items():
            (out / name).write_text(text)
            logger.info("wrote %s", out / name)
    except UsageError as exc:
        print(f"herdkit: usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"herdkit: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
