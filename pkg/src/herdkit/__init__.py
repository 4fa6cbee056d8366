"""Herding detection in multi-asset return panels."""

from ._kernels import BACKEND
from .dispersion import DispersionSeries, csad, cssd, market_return
from .events import AnnouncementCalendar, ExogSeries, index_returns, load_calendar, to_dummy
from .msherd import (
    MsFit,
    MsSpec,
    build_design,
    em_fit,
    fit_ms,
    hamilton_filter,
    kim_smoother,
    label_regimes,
    per_regime_herding,
)
from .panel import DatedSeries, PricePanel, ReturnPanel, SeriesSpec, align, compute_returns, deseasonalize, load_prices
from .regress import (
    DiagnosticResult,
    HerdingVerdict,
    OlsFit,
    arch_test,
    breusch_godfrey,
    classify_herding,
    event_regression,
    fit_ols,
    herding_regression,
    render_fit_table,
    dynamic_regression,
)
from .synth import SynthConfig, simulate_csad, simulate_panel
from .unitroot import UnitRootResult, adf, newey_west_lrv, pp

__version__ = "0.1.0"
