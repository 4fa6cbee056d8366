import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from herdkit.unitroot import adf, critical_values, newey_west_lrv, pp, pp_bandwidth, render_unit_root_table, unit_root_battery


def ar1(rng, T, phi, c=0.0):
    e = rng.normal(size=T)
    y = np.empty(T)
    y[0] = e[0]
    for t in range(1, T):
        y[t] = c + phi * y[t - 1] + e[t]
    return y


def test_critical_values_at_table_rows():
    assert critical_values(100, "constant") == pytest.approx({0.01: -3.51, 0.05: -2.89, 0.10: -2.58})
    assert critical_values(500, "constant_trend") == pytest.approx({0.01: -3.98, 0.05: -3.42, 0.10: -3.13})
    assert critical_values(10**9, "constant")[0.05] == pytest.approx(-2.86, abs=1e-6)


def test_critical_values_monotone_in_nobs():
    prev = None
    for n in (25, 40, 75, 150, 400, 2000):
        cv = critical_values(n, "constant")[0.05]
        if prev is not None:
            assert cv >= prev
        prev = cv


def test_pp_equals_adf_without_corrections():
    y = ar1(np.random.default_rng(0), 300, 0.9)
    for spec in ("constant", "constant_trend"):
        assert pp(y, spec, bandwidth=0).statistic == pytest.approx(adf(y, spec, lags=0).statistic, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 1000), st.floats(-100, 100), st.floats(0.01, 100))
def test_affine_invariance(seed, a, b):
    y = ar1(np.random.default_rng(seed), 120, 0.8)
    for k in (0, 3):
        assert adf(a + b * y, lags=k).statistic == pytest.approx(adf(y, lags=k).statistic, rel=1e-8)
    assert pp(a + b * y).statistic == pytest.approx(pp(y).statistic, rel=1e-8)


def test_trend_spec_ignores_added_trend():
    y = ar1(np.random.default_rng(1), 200, 0.7)
    t = np.arange(200)
    assert adf(y + 0.3 * t, "constant_trend", 2).statistic == pytest.approx(adf(y, "constant_trend", 2).statistic, rel=1e-8)


def test_adf_matches_statsmodels():
    sm = pytest.importorskip("statsmodels.tsa.stattools")
    rng = np.random.default_rng(2)
    for _ in range(10):
        y = np.cumsum(rng.normal(size=int(rng.integers(80, 400))))
        for spec, reg in (("constant", "c"), ("constant_trend", "ct")):
            for k in (0, 1, 4):
                ref = sm.adfuller(y, maxlag=k, regression=reg, autolag=None)[0]
                assert adf(y, spec, k).statistic == pytest.approx(ref, rel=1e-9)
            r = adf(y, spec)
            ref = sm.adfuller(y, regression=reg, autolag="AIC")
            assert r.lags_or_bandwidth == ref[2]
            assert r.statistic == pytest.approx(ref[0], rel=1e-9)


def test_lrv_white_noise_bandwidth_zero():
    u = np.random.default_rng(3).normal(size=50)
    assert newey_west_lrv(u, 0) == pytest.approx(u @ u / 50, rel=1e-14)


def test_lrv_alternating_series():
    # gamma_0 = 1, gamma_1 = -(T-1)/T, weight 1/2: long-run variance 1/T
    for T in (10, 100, 1000):
        u = np.where(np.arange(T) % 2 == 0, 1.0, -1.0)
        assert newey_west_lrv(u, 1) == pytest.approx(1.0 / T, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 20))
def test_lrv_nonnegative(seed, bw):
    u = np.random.default_rng(seed).normal(size=40) * np.random.default_rng(seed + 1).uniform(0.1, 3)
    assert newey_west_lrv(u, bw) >= -1e-12


def test_lrv_bandwidth_bounds():
    with pytest.raises(ValueError):
        newey_west_lrv(np.ones(5), 5)
    with pytest.raises(ValueError):
        newey_west_lrv(np.ones(5), -1)


def test_pp_bandwidth_rule():
    assert pp_bandwidth(100) == 4
    assert pp_bandwidth(1000) == 6


def test_constant_series_rejected():
    with pytest.raises(ValueError, match="constant"):
        adf(np.ones(50))


@pytest.mark.slow
def test_size_and_power_small_monte_carlo():
    rng = np.random.default_rng(4)
    rw_rej = sum(adf(np.cumsum(rng.normal(size=250))).rejects(0.05) for _ in range(100))
    st_rej = sum(pp(ar1(rng, 250, 0.5)).rejects(0.05) for _ in range(100))
    assert rw_rej <= 12
    assert st_rej >= 95


def test_white_noise_rejects_everywhere_random_walk_does_not():
    rng = np.random.default_rng(5)
    wn = unit_root_battery(rng.normal(size=500))
    assert all(r.rejects(0.01) for r in wn.values())
    rw = unit_root_battery(np.cumsum(np.random.default_rng(6).normal(size=500)))
    assert not any(r.rejects(0.05) for r in rw.values())
    text = render_unit_root_table({"wn": wn, "rw": rw})
    assert "***" in text and "(p>0.10)" in text
