import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from herdkit.panel import (
    DatedSeries,
    PricePanel,
    SeriesSpec,
    align,
    compute_returns,
    deseasonalize,
    load_prices,
    read_table,
    weekday,
    write_prices,
)


def _write(tmp_path, text, name="p.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_prices_wide(tmp_path):
    p = _write(tmp_path, "date,BTC,ETH\n2020-01-01,100,10\n2020-01-02,110,\n2020-01-03,121,12\n")
    panel = load_prices(p)
    assert panel.assets == ("BTC", "ETH")
    assert panel.shape == (3, 2)
    assert panel.observed.tolist() == [[True, True], [True, False], [True, True]]


def test_tab_delimited(tmp_path):
    p = _write(tmp_path, "date\tA\tB\n2020-01-01\t1\t2\n2020-01-02\t2\t3\n")
    assert load_prices(p).prices.tolist() == [[1, 2], [2, 3]]


def test_nonpositive_price_rejects_row(tmp_path):
    p = _write(tmp_path, "date,A,B\n2020-01-01,1,2\n2020-01-02,0,3\n2020-01-03,2,4\n2020-01-04,3,5\n")
    panel = load_prices(p)
    assert panel.shape == (3, 2)
    assert len(panel.rejected) == 1 and "2020-01-02" in panel.rejected[0]


def test_empty_table_errors(tmp_path):
    with pytest.raises(ValueError, match="empty"):
        load_prices(_write(tmp_path, "\n\n"))


def test_unsorted_dates_error(tmp_path):
    with pytest.raises(ValueError, match="sorted"):
        load_prices(_write(tmp_path, "date,A,B\n2020-01-02,1,2\n2020-01-01,1,2\n"))


def test_single_asset_rejected(tmp_path):
    with pytest.raises(ValueError):
        load_prices(_write(tmp_path, "date,A\n2020-01-01,1\n2020-01-02,2\n"))


def test_unparseable_cells_read_as_missing(tmp_path):
    dates, names, values = read_table(_write(tmp_path, "date,A,B\n2020-01-01,x,2\n2020-01-02,1,2\n"))
    assert np.isnan(values[0, 0]) and values[1, 0] == 1


def test_write_read_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    prices = np.exp(rng.normal(size=(6, 3)))
    panel = PricePanel(np.datetime64("2021-03-01") + np.arange(6), ("a", "b", "c"), prices)
    write_prices(panel, tmp_path / "x.csv")
    back = load_prices(tmp_path / "x.csv")
    np.testing.assert_array_equal(back.prices, prices)


def test_simple_and_log_returns():
    panel = PricePanel(np.datetime64("2020-01-01") + np.arange(3), ("a", "b"), np.array([[100.0, 50], [110, 50], [99, 25]]))
    r = compute_returns(panel)
    np.testing.assert_allclose(r.returns, [[0.1, 0.0], [-0.1, -0.5]])
    lr = compute_returns(panel, SeriesSpec("log"))
    np.testing.assert_allclose(lr.returns, np.log([[1.1, 1.0], [0.9, 0.5]]))


def test_returns_do_not_bridge_gaps():
    p = np.array([[1.0, 1.0], [np.nan, 2.0], [3.0, 4.0]])
    panel = PricePanel(np.datetime64("2020-01-01") + np.arange(3), ("a", "b"), p, np.isfinite(p))
    r = compute_returns(panel)
    assert r.observed.tolist() == [[False, True], [False, True]]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.5, 2.0), min_size=3, max_size=30))
def test_log_returns_sum_to_log_ratio(ratios):
    p = np.cumprod([1.0] + ratios)
    panel = PricePanel(np.datetime64("2020-01-01") + np.arange(p.size), ("a", "b"), np.column_stack([p, p]))
    lr = compute_returns(panel, SeriesSpec("log"))
    assert lr.returns[:, 0].sum() == pytest.approx(np.log(p[-1] / p[0]), abs=1e-9)


def test_weekday_monday_zero():
    assert weekday(np.array(["2024-01-01", "2024-01-07"], dtype="datetime64[D]")).tolist() == [0, 6]


def test_deseasonalize_removes_weekday_means():
    dates = np.datetime64("2024-01-01") + np.arange(70)
    vals = np.asarray(weekday(dates), dtype=float) + np.random.default_rng(1).normal(0, 0.1, 70)
    out = deseasonalize(DatedSeries(dates, vals))
    wd = weekday(dates)
    means = [out.values[wd == d].mean() for d in range(7)]
    np.testing.assert_allclose(means, vals.mean(), atol=1e-12)


def test_deseasonalize_needs_two_obs_per_weekday():
    dates = np.datetime64("2024-01-01") + np.arange(8)
    with pytest.raises(ValueError, match="Tue"):
        deseasonalize(DatedSeries(dates, np.arange(8.0)))


def test_align_inner_join_and_error():
    a = DatedSeries(np.datetime64("2020-01-01") + np.arange(5), np.arange(5.0), "a")
    b = DatedSeries(np.datetime64("2020-01-03") + np.arange(5), np.arange(5.0), "b")
    la, lb = align(a, b)
    assert la.values.tolist() == [2, 3, 4] and lb.values.tolist() == [0, 1, 2]
    c = DatedSeries(np.datetime64("2021-01-01") + np.arange(2), np.zeros(2), "c")
    with pytest.raises(ValueError, match="2020-01-01..2020-01-05"):
        align(a, c)
