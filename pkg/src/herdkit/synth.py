"""Synthetic CSAD series / return panels with known parameters, and brute-force likelihood oracles."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .dispersion import DispersionSeries
from .panel import ReturnPanel

CSAD_FLOOR = 1e-6
MAX_FLOOR_RATE = 0.01
MAX_PATHS = 10**6


@dataclass(frozen=True)
class SynthConfig:
    """Regime-switching CSAD law.

    ``gamma[s] = (g0, g1, g2)`` per regime; ``sigma`` per regime (``None``
    means every regime uses ``noise_sd``).  ``rm_volatility`` and ``rm_mean``
    may be scalars or per-regime sequences.
    """

    n_assets: int = 100
    n_periods: int = 2000
    gamma: tuple = ((0.03, 0.5, -2.0),)
    sigma: tuple | None = (0.005,)
    trans: tuple = ((1.0,),)
    rm_volatility: float | tuple = 0.05
    rm_mean: float | tuple = 0.0
    noise_sd: float = 0.005
    seed: int = 0
    start_date: str = "2014-05-01"

    def __post_init__(self):
        K = self.n_regimes
        g = np.asarray(self.gamma, dtype=np.float64)
        if g.shape != (K, 3):
            raise ValueError(f"gamma must be {K} rows of (g0, g1, g2), got shape {g.shape}")
        P = np.asarray(self.trans, dtype=np.float64)
        if P.shape != (K, K):
            raise ValueError(f"trans must be {K}x{K}, got {P.shape}")
        for i, row in enumerate(P):
            if np.any(row < 0) or abs(row.sum() - 1.0) > 1e-10:
                raise ValueError(f"trans row {i} is not a probability vector: {row.tolist()} (sum {row.sum():.6g})")
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=np.float64)
            if s.shape != (K,) or np.any(s <= 0):
                raise ValueError(f"sigma must hold {K} positive values")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        vol = np.broadcast_to(np.asarray(self.rm_volatility, dtype=np.float64), (K,))
        if np.any(vol <= 0):
            raise ValueError("rm_volatility must be > 0")
        np.broadcast_to(np.asarray(self.rm_mean, dtype=np.float64), (K,))
        if self.n_assets < 2 or self.n_periods < 2:
            raise ValueError("need n_assets >= 2 and n_periods >= 2")

    @property
    def n_regimes(self) -> int:
        return len(self.trans)

    def regime_sigma(self) -> np.ndarray:
        if self.sigma is None:
            return np.full(self.n_regimes, float(self.noise_sd))
        return np.asarray(self.sigma, dtype=np.float64)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synth config keys: {sorted(unknown)}")

        def tup(v):
            return tuple(tup(x) for x in v) if isinstance(v, (list, tuple)) else v

        return cls(**{k: tup(v) for k, v in d.items()})

    @classmethod
    def load(cls, path) -> "SynthConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def canonical_two_regime(seed: int = 0, n_periods: int = 3000) -> SynthConfig:
    """Calm anti-herding regime vs turbulent herding regime."""
    return SynthConfig(
        n_periods=n_periods,
        gamma=((0.03, 0.3, 0.8), (0.06, 0.4, -2.5)),
        sigma=(0.002, 0.02),
        trans=((0.95, 0.05), (0.05, 0.95)),
        rm_volatility=0.04,
        seed=seed,
    )


def planted_four_regime(seed: int = 0, n_periods: int = 2000) -> SynthConfig:
    """Regimes planted as (highest vol, low vol, best income, highest loss)."""
    stay, move = 0.94, 0.02
    P = tuple(tuple(stay if i == j else move for j in range(4)) for i in range(4))
    return SynthConfig(
        n_periods=n_periods,
        gamma=((0.09, 0.4, -2.0), (0.02, 0.3, 0.5), (0.035, 0.3, -0.5), (0.07, 0.3, -1.0)),
        sigma=(0.03, 0.002, 0.008, 0.012),
        trans=P,
        rm_volatility=(0.06, 0.02, 0.04, 0.04),
        rm_mean=(0.0, 0.0, 0.03, -0.03),
        seed=seed,
    )


@dataclass(frozen=True)
class SynthTruth:
    disp: DispersionSeries
    path: np.ndarray
    target_csad: np.ndarray
    floored: int
    config: SynthConfig = field(repr=False)


def _dates(config: SynthConfig, n: int, offset: int = 0) -> np.ndarray:
    return np.datetime64(config.start_date, "D") + np.arange(offset, offset + n)


def _draw(config: SynthConfig, rng):
    K, T = config.n_regimes, config.n_periods
    P = np.asarray(config.trans, dtype=np.float64)
    path = np.empty(T, dtype=np.int64)
    # start from the stationary distribution
    pi = np.linalg.lstsq(np.vstack([P.T - np.eye(K), np.ones((1, K))]), np.r_[np.zeros(K), 1.0], rcond=None)[0]
    pi = np.clip(pi, 0, None)
    pi /= pi.sum()
    cum = np.cumsum(P, axis=1)
    u = rng.random(T)
    path[0] = min(int(np.searchsorted(np.cumsum(pi), u[0], side="right")), K - 1)
    for t in range(1, T):
        path[t] = min(int(np.searchsorted(cum[path[t - 1]], u[t], side="right")), K - 1)
    vol = np.broadcast_to(np.asarray(config.rm_volatility, dtype=np.float64), (K,))
    mu = np.broadcast_to(np.asarray(config.rm_mean, dtype=np.float64), (K,))
    rm = mu[path] + vol[path] * rng.standard_normal(T)
    g = np.asarray(config.gamma, dtype=np.float64)[path]
    eps = config.regime_sigma()[path] * rng.standard_normal(T)
    csad = g[:, 0] + g[:, 1] * np.abs(rm) + g[:, 2] * rm * rm + eps
    return path, rm, csad


def _simulate(config: SynthConfig, rng) -> SynthTruth:
    path, rm, raw = _draw(config, rng)
    low = raw < CSAD_FLOOR
    floored = int(low.sum())
    T = config.n_periods
    if floored >= MAX_FLOOR_RATE * T:
        raise ValueError(
            f"CSAD floor hit on {floored}/{T} dates (>= {MAX_FLOOR_RATE:.0%}); "
            "raise gamma0 or lower sigma / rm_volatility"
        )
    csad = np.where(low, CSAD_FLOOR, raw)
    disp = DispersionSeries(_dates(config, T, 1), csad, rm, np.full(T, config.n_assets))
    return SynthTruth(disp, path, csad, floored, config)


def simulate_csad(config: SynthConfig) -> tuple[DispersionSeries, np.ndarray]:
    """CSAD_t = g0 + g1|Rm| + g2 Rm^2 + eps under a Markov regime path."""
    truth = _simulate(config, np.random.default_rng(config.seed))
    return truth.disp, truth.path


def _panel_from_truth(truth: SynthTruth, rng) -> ReturnPanel:
    cfg = truth.config
    T, N = cfg.n_periods, cfg.n_assets
    u = rng.laplace(0.0, 1.0, size=(T, N))
    u -= u.mean(axis=1, keepdims=True)
    R = truth.disp.rm[:, None] + truth.target_csad[:, None] * u
    if np.any(R <= -1.0):
        raise ValueError("simulated returns reached -100%; lower CSAD or rm_volatility")
    return ReturnPanel(truth.disp.dates, tuple(f"A{i:03d}" for i in range(N)), R, np.ones((T, N), dtype=bool))


def simulate(config: SynthConfig) -> tuple[ReturnPanel, SynthTruth]:
    """Asset panel plus the planted truth it was generated from."""
    rng = np.random.default_rng(config.seed)
    truth = _simulate(config, rng)
    return _panel_from_truth(truth, rng), truth


def simulate_panel(config: SynthConfig) -> ReturnPanel:
    """R_it = R_mt + d_t * u_it, u Laplace(0,1) centred per date, d_t the target CSAD."""
    return simulate(config)[0]


def panel_from_targets(rm, target, n_assets: int, seed: int = 0, start_date="2014-05-02") -> ReturnPanel:
    """Asset returns for given market returns and CSAD targets (d_t = target_t)."""
    rm = np.asarray(rm, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    rng = np.random.default_rng(seed)
    u = rng.laplace(0.0, 1.0, size=(rm.size, n_assets))
    u -= u.mean(axis=1, keepdims=True)
    dates = np.datetime64(start_date, "D") + np.arange(rm.size)
    R = rm[:, None] + target[:, None] * u
    return ReturnPanel(dates, tuple(f"A{i:03d}" for i in range(n_assets)), R, np.ones(R.shape, dtype=bool))


def prices_from_returns(panel: ReturnPanel, start_price: float = 100.0):
    """Cumulate a gap-free simple-return panel into prices (one extra leading date)."""
    if not panel.observed.all():
        raise ValueError("price reconstruction needs a gap-free panel")
    gross = np.vstack([np.ones((1, panel.shape[1])), 1.0 + panel.returns])
    prices = start_price * np.cumprod(gross, axis=0)
    dates = np.concatenate([[panel.dates[0] - np.timedelta64(1, "D")], panel.dates])
    return dates, prices


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------


def _oracle_inputs(beta, sigma, trans, init, design, response):
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    beta = np.atleast_2d(np.asarray(beta, dtype=np.float64))
    sigma = np.asarray(sigma, dtype=np.float64).reshape(-1)
    trans = np.asarray(trans, dtype=np.float64)
    init = np.asarray(init, dtype=np.float64).reshape(-1)
    K, T = sigma.size, y.size
    if float(K) ** T > MAX_PATHS:
        raise ValueError(f"{K}^{T} regime paths exceeds the enumeration limit {MAX_PATHS}")
    return X, y, beta, sigma, trans, init, K, T


def _path_logprobs(beta, sigma, trans, init, design, response):
    X, y, beta, sigma, trans, init, K, T = _oracle_inputs(beta, sigma, trans, init, design, response)
    paths = np.indices((K,) * T).reshape(T, -1).T  # (K^T, T)
    mean = X @ beta.T  # (T, K)
    t = np.arange(T)
    mu = mean[t, paths]
    sd = sigma[paths]
    with np.errstate(divide="ignore"):
        lp = np.log(init[paths[:, 0]]) + np.log(trans[paths[:, :-1], paths[:, 1:]]).sum(axis=1)
    ld = (-0.5 * np.log(2 * np.pi * sd * sd) - 0.5 * ((y - mu) / sd) ** 2).sum(axis=1)
    return paths, lp + ld


def brute_force_loglik(beta, sigma, trans, init, design, response) -> float:
    """log sum over all K^T regime paths of P(path) * p(y | path)."""
    _, lw = _path_logprobs(beta, sigma, trans, init, design, response)
    return float(logsumexp(lw))


def brute_force_marginals(beta, sigma, trans, init, design, response) -> np.ndarray:
    """Posterior P(S_t = k | all data) by enumeration, shape (T, K)."""
    paths, lw = _path_logprobs(beta, sigma, trans, init, design, response)
    K = np.asarray(sigma).size
    w = np.exp(lw - logsumexp(lw))
    T = paths.shape[1]
    out = np.zeros((T, K))
    for t in range(T):
        out[t] = np.bincount(paths[:, t], weights=w, minlength=K)
    return out


def brute_force_loglik_loops(beta, sigma, trans, init, design, response) -> float:
    """Same quantity as :func:`brute_force_loglik`, written with scalar loops."""
    X, y, beta, sigma, trans, init, K, T = _oracle_inputs(beta, sigma, trans, init, design, response)
    terms = []
    for path in itertools.product(range(K), repeat=T):
        if init[path[0]] == 0:
            continue
        acc = math.log(init[path[0]])
        ok = True
        for t in range(T):
            s = path[t]
            if t:
                p = trans[path[t - 1], s]
                if p == 0:
                    ok = False
                    break
                acc += math.log(p)
            mu = sum(X[t, j] * beta[s, j] for j in range(X.shape[1]))
            z = (y[t] - mu) / sigma[s]
            acc += -0.5 * math.log(2 * math.pi) - math.log(sigma[s]) - 0.5 * z * z
        if ok:
            terms.append(acc)
    m = max(terms)
    return m + math.log(math.fsum(math.exp(a - m) for a in terms))
