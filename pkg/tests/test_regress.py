import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from herdkit.design import CONST, RM_ABS, RM_SQ, herd_design
from herdkit.dispersion import DispersionSeries
from herdkit.regress import (
    RankError,
    arch_test,
    breusch_godfrey,
    classify_activation,
    classify_herding,
    fit_ols,
    fit_to_dict,
    herding_regression,
    herding_verdict,
    render_fit_table,
)


def normal_equations(X, y):
    """Textbook OLS through (X'X)^-1 X'y."""
    XtX = X.T @ X
    b = np.linalg.solve(XtX, X.T @ y)
    e = y - X @ b
    s2 = e @ e / (X.shape[0] - X.shape[1])
    se = np.sqrt(np.diag(s2 * np.linalg.inv(XtX)))
    r2 = 1 - (e @ e) / ((y - y.mean()) @ (y - y.mean()))
    return b, se, r2


def random_design(rng, n=None, k=None):
    n = n or int(rng.integers(20, 200))
    k = k or int(rng.integers(2, 6))
    X = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
    y = X @ rng.normal(size=k) + rng.normal(size=n)
    return X, y


def test_matches_normal_equations():
    rng = np.random.default_rng(0)
    for _ in range(100):
        X, y = random_design(rng)
        fit = fit_ols(X, y)
        b, se, r2 = normal_equations(X, y)
        np.testing.assert_allclose(fit.coef, b, rtol=1e-8, atol=1e-12)
        np.testing.assert_allclose(fit.se, se, rtol=1e-8)
        assert fit.r2 == pytest.approx(r2, rel=1e-8)


def test_f_stat_and_pvalues_consistent():
    rng = np.random.default_rng(1)
    X, y = random_design(rng, 80, 4)
    fit = fit_ols(X, y)
    n, k = X.shape
    f = (fit.r2 / (k - 1)) / ((1 - fit.r2) / (n - k))
    assert fit.fstat == pytest.approx(f, rel=1e-10)
    np.testing.assert_allclose(fit.pvalue, 2 * stats.t.sf(np.abs(fit.coef / fit.se), n - k))
    assert fit.adj_r2 == pytest.approx(1 - (1 - fit.r2) * (n - 1) / (n - k))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_rescaling_invariance(seed, c_col, c_y):
    rng = np.random.default_rng(seed)
    X, y = random_design(rng, 60, 4)
    base = fit_ols(X, y)
    Xs = X.copy()
    Xs[:, 2] *= c_col
    scaled = fit_ols(Xs, y * c_y)
    expect = base.coef * c_y
    expect[2] /= c_col
    np.testing.assert_allclose(scaled.coef, expect, rtol=1e-10, atol=1e-12 * np.abs(expect).max())
    np.testing.assert_allclose(scaled.tstat, base.tstat, rtol=1e-10, atol=1e-9)
    assert scaled.r2 == pytest.approx(base.r2, rel=1e-10, abs=1e-12)


def test_exact_fit_design():
    X = np.column_stack([np.ones(4), [1.0, 2, 3, 4]])
    y = np.array([2.0, 4, 6, 8]) + np.array([0, 1e-12, -1e-12, 0])
    fit = fit_ols(X, y)
    assert fit.coef[1] == pytest.approx(2.0)
    assert fit.r2 == pytest.approx(1.0)


def test_rank_deficient_names_columns():
    rng = np.random.default_rng(2)
    x = rng.normal(size=30)
    X = np.column_stack([np.ones(30), x, 2 * x])
    with pytest.raises(RankError, match="b.*c"):
        fit_ols(X, rng.normal(size=30), labels=("a", "b", "c"))


def test_hac_matches_manual():
    rng = np.random.default_rng(3)
    X, y = random_design(rng, 100, 3)
    fit = fit_ols(X, y, cov_type="hac", hac_lags=2)
    e = fit.residuals
    S = sum((1 - abs(j) / 3) * sum(np.outer(X[t] * e[t], X[t - abs(j)] * e[t - abs(j)]) if j >= 0 else
            np.outer(X[t - abs(j)] * e[t - abs(j)], X[t] * e[t]) for t in range(abs(j), 100)) for j in range(-2, 3))
    B = np.linalg.inv(X.T @ X)
    np.testing.assert_allclose(fit.cov, B @ S @ B, rtol=1e-10)


# ---- herding regressions --------------------------------------------------


def _disp(rm, csad_v):
    T = rm.size
    return DispersionSeries(np.datetime64("2015-01-01") + np.arange(T), csad_v, rm, np.full(T, 50))


def test_noiseless_plant_recovered():
    rm = np.random.default_rng(4).normal(0, 0.05, 400)
    fit = herding_regression(_disp(rm, 0.03 + 0.5 * np.abs(rm) - 2.0 * rm**2))
    np.testing.assert_allclose(fit.coef, [0.03, 0.5, -2.0], atol=1e-10)
    assert fit.design_labels == (CONST, RM_ABS, RM_SQ)


def test_short_series_rejected():
    rm = np.linspace(-0.1, 0.1, 20)
    with pytest.raises(ValueError, match="30"):
        herding_regression(_disp(rm, np.abs(rm)))


def test_design_with_vol_and_lags():
    rng = np.random.default_rng(5)
    rm = rng.normal(0, 0.05, 100)
    d = herd_design(_disp(rm, 0.02 + np.abs(rm)), n_lags=3, vol_window=30)
    assert d.X.shape == (67, 8)
    assert d.y[0] == 0.02 + abs(rm[33])
    np.testing.assert_allclose(d.X[0, 5:], [0.02 + abs(rm[32]), 0.02 + abs(rm[31]), 0.02 + abs(rm[30])])
    assert d.X[0, 4] == pytest.approx(np.std(rm[3:33], ddof=1))


# ---- verdicts ------------------------------------------------------------------


@pytest.mark.parametrize(
    "g2,p,alpha,verdict",
    [
        (-2.761, 0.06, 0.10, "herding"),  # regime with the highest volatility in the published table
        (0.786, 0.05, 0.10, "anti_herding"),  # low-volatility regime
        (-0.673, 0.09, 0.10, "herding"),
        (-0.673, 0.09, 0.05, "no_herding"),
        (-1.0, 0.05, 0.05, "no_herding"),
        (0.0, 0.0, 0.05, "no_herding"),
    ],
)
def test_herding_verdict(g2, p, alpha, verdict):
    assert herding_verdict(g2, p, alpha).verdict == verdict


# ---- diagnostics ---------------------------------------------------------------


def _resid_fit(e, rng):
    n = e.size
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    y = X @ [1.0, 0.5] + e
    return fit_ols(X, y)


def test_bg_hand_computed():
    rng = np.random.default_rng(6)
    fit = _resid_fit(rng.normal(size=120), rng)
    u = fit.residuals
    Z = np.column_stack([fit.design, np.r_[0, u[:-1]], np.r_[0, 0, u[:-2]]])
    e = u - Z @ np.linalg.lstsq(Z, u, rcond=None)[0]
    r2 = 1 - e @ e / ((u - u.mean()) @ (u - u.mean()))
    bg = breusch_godfrey(fit, 2)
    assert bg.statistic == pytest.approx(120 * r2, rel=1e-10)
    assert bg.pvalue == pytest.approx(stats.chi2.sf(120 * r2, 2), rel=1e-10)


def test_arch_hand_computed():
    u = np.random.default_rng(7).normal(size=200)
    e2 = u**2
    res = stats.linregress(e2[:-1], e2[1:])
    a = arch_test(u, 1)
    assert a.statistic == pytest.approx(199 * res.rvalue**2, rel=1e-10)


def test_bg_pvalues_uniform_under_null():
    rng = np.random.default_rng(8)
    p = [breusch_godfrey(_resid_fit(rng.normal(size=300), rng), 2).pvalue for _ in range(500)]
    assert stats.kstest(p, "uniform").pvalue > 0.001


def test_arch_pvalues_uniform_under_null():
    rng = np.random.default_rng(9)
    p = [arch_test(rng.normal(size=300), 1).pvalue for _ in range(500)]
    assert stats.kstest(p, "uniform").pvalue > 0.001


def test_bg_detects_ar1():
    rng = np.random.default_rng(10)
    hits = 0
    for _ in range(50):
        e = np.zeros(500)
        z = rng.normal(size=500)
        for t in range(1, 500):
            e[t] = 0.4 * e[t - 1] + z[t]
        hits += breusch_godfrey(_resid_fit(e, rng), 2).pvalue < 0.05
    assert hits >= 48


def test_arch_detects_arch1():
    rng = np.random.default_rng(11)
    hits = 0
    for _ in range(50):
        e = np.zeros(800)
        for t in range(1, 800):
            e[t] = np.sqrt(0.2 + 0.6 * e[t - 1] ** 2) * rng.normal()
        hits += arch_test(e, 1).pvalue < 0.05
    assert hits >= 48


def test_diagnostic_argument_checks():
    rng = np.random.default_rng(12)
    fit = _resid_fit(rng.normal(size=10), rng)
    with pytest.raises(ValueError):
        breusch_godfrey(fit, 0)
    with pytest.raises(ValueError):
        breusch_godfrey(fit, 8)
    with pytest.raises(ValueError):
        arch_test(np.ones(3), 1)


# ---- rendering --------------------------------------------------------------


def test_render_and_dict_are_stable():
    rm = np.random.default_rng(13).normal(0, 0.05, 300)
    csad_v = 0.03 + 0.5 * np.abs(rm) - 2 * rm**2 + np.random.default_rng(14).normal(0, 0.004, 300)
    fit = herding_regression(_disp(rm, csad_v))
    diags = [breusch_godfrey(fit), arch_test(fit.residuals)]
    a = render_fit_table({"OLS": (fit, diags)})
    b = render_fit_table({"OLS": (fit, diags)})
    assert a == b
    assert "R2m,t" in a and "Breusch-Godfrey LM" in a
    d = fit_to_dict(fit, diags, {"verdict": classify_herding(fit).verdict})
    assert d["verdict"] == "herding"
    assert [c["label"] for c in d["coefficients"]] == [CONST, RM_ABS, RM_SQ]
    with pytest.raises(KeyError):
        classify_activation(fit)
