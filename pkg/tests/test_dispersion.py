import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from herdkit.dispersion import (
    DispersionSeries,
    csad,
    cssd,
    deseasonalize_dispersion,
    market_return,
    read_dispersion,
    write_dispersion,
)
from herdkit.panel import ReturnPanel


def naive(returns, observed, min_assets=2):
    """Element-by-element recomputation with Python floats."""
    out = []
    for t in range(returns.shape[0]):
        xs = [float(returns[t, i]) for i in range(returns.shape[1]) if observed[t, i]]
        if len(xs) < min_assets:
            continue
        n = len(xs)
        m = math.fsum(xs) / n
        ad = math.fsum(abs(x - m) for x in xs) / n
        sd = math.sqrt(math.fsum((x - m) ** 2 for x in xs) / (n - 1))
        out.append((t, n, m, ad, sd))
    return out


def _panel(R, mask=None):
    T, N = R.shape
    mask = np.ones(R.shape, dtype=bool) if mask is None else mask
    return ReturnPanel(np.datetime64("2020-01-01") + np.arange(T), tuple(f"a{i}" for i in range(N)), R, mask)


def test_worked_example():
    panel = _panel(np.array([[0.01, 0.03, -0.01]]))
    d = csad(panel)
    assert d.rm[0] == pytest.approx(0.01, abs=1e-15)
    assert d.csad[0] == pytest.approx(0.04 / 3, abs=1e-15)
    assert d.cssd[0] == pytest.approx(0.02, abs=1e-15)
    assert market_return(panel, "2020-01-01") == pytest.approx(0.01, abs=1e-15)


@pytest.mark.parametrize("n", [2, 3, 7, 10, 33])
def test_identical_assets_zero_dispersion(n):
    R = np.tile(np.array([[0.02], [-0.05], [0.0], [0.1], [1 / 3]]), (1, n))
    d = csad(_panel(R))
    assert np.all(d.csad == 0) and np.all(d.cssd == 0)


def test_sparse_dates_dropped():
    R = np.array([[0.1, 0.2, 0.3], [0.1, 0.2, 0.3], [0.1, 0.2, 0.3]])
    mask = np.array([[True, True, True], [True, False, False], [False, True, True]])
    d = csad(_panel(R, mask))
    assert d.n_assets.tolist() == [3, 2]
    assert d.dates.tolist() == [np.datetime64("2020-01-01"), np.datetime64("2020-01-03")]
    with pytest.raises(ValueError):
        market_return(_panel(R, mask), "2020-01-02")


def test_matches_naive_on_random_panels():
    rng = np.random.default_rng(7)
    for _ in range(200):
        T, N = rng.integers(1, 30), rng.integers(2, 10)
        R = rng.normal(0, 0.05, (T, N))
        mask = rng.random((T, N)) > 0.2
        d = csad(_panel(R, mask))
        ref = naive(R, mask)
        assert len(d) == len(ref)
        for k, (t, n, m, ad, sd) in enumerate(ref):
            assert d.n_assets[k] == n
            assert abs(d.rm[k] - m) <= 1e-12
            assert abs(d.csad[k] - ad) <= 1e-12
            assert abs(d.cssd[k] - sd) <= 1e-12


returns_matrix = hnp.arrays(
    np.float64,
    st.tuples(st.integers(1, 12), st.integers(2, 8)),
    elements=st.floats(-0.5, 0.5, allow_nan=False),
)


@settings(max_examples=100, deadline=None)
@given(returns_matrix, st.floats(-0.3, 0.3))
def test_common_shift_moves_rm_only(R, c):
    a, b = csad(_panel(R)), csad(_panel(R + c))
    np.testing.assert_allclose(b.rm, a.rm + c, atol=1e-12)
    np.testing.assert_allclose(b.csad, a.csad, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(returns_matrix, st.floats(0.1, 1.9))
def test_scaling_scales_dispersion(R, k):
    a, b = csad(_panel(R)), csad(_panel(R * k))
    np.testing.assert_allclose(b.csad, k * a.csad, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(b.cssd, k * a.cssd, rtol=1e-12, atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(returns_matrix, st.randoms(use_true_random=False))
def test_asset_order_irrelevant(R, r):
    perm = list(range(R.shape[1]))
    r.shuffle(perm)
    a, b = csad(_panel(R)), csad(_panel(R[:, perm]))
    np.testing.assert_allclose(b.csad, a.csad, atol=1e-12)
    np.testing.assert_allclose(b.rm, a.rm, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(returns_matrix)
def test_mean_absolute_below_root_mean_square(R):
    d = csad(_panel(R))
    n = d.n_assets
    assert np.all(d.csad >= 0)
    assert np.all(d.csad <= d.cssd * np.sqrt((n - 1) / n) + 1e-12)


def test_cssd_series():
    R = np.random.default_rng(0).normal(0, 0.05, size=(5, 4))
    s = cssd(_panel(R))
    np.testing.assert_allclose(s.values, R.std(axis=1, ddof=1), rtol=1e-12)


def test_round_trip_file(tmp_path):
    R = np.random.default_rng(2).normal(0, 0.03, (20, 5))
    d = csad(_panel(R))
    write_dispersion(d, tmp_path / "d.csv")
    back = read_dispersion(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.csad, d.csad)
    np.testing.assert_array_equal(back.rm, d.rm)
    np.testing.assert_array_equal(back.dates, d.dates)


def test_deseasonalize_clips_at_zero(caplog):
    dates = np.datetime64("2024-01-01") + np.arange(28)
    csad_v = np.where(np.arange(28) % 7 == 0, 1.0, 0.0)
    csad_v[0] = 0.0  # Monday values 0,1,1,1 -> one goes below its weekday mean
    d = DispersionSeries(dates, csad_v, np.zeros(28), np.full(28, 3))
    out = deseasonalize_dispersion(d)
    assert np.all(out.csad >= 0)
    assert "clipped" in caplog.text
