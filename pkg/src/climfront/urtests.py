"""Dickey-Fuller regressions and the Im-Pesaran-Shin panel unit-root test.

The null hypothesis is the conventional one: every country's series has a
unit root. Small (very negative) statistics reject it in favour of
stationarity for at least some countries, so the p-value is the lower tail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import ndtr

from .errors import DegenerateSeries, InvalidInput, NoUsableSeries, TooShort

MIN_LENGTH = 10

# Mean and variance of the Dickey-Fuller t-statistic (intercept, no lags) under
# a Gaussian random walk, indexed by the number of observations entering the
# regression. Generated by 200,000-draw simulation per row.
_MOMENT_OBS = np.array([10, 15, 20, 25, 30, 40, 50, 60, 70, 100], dtype=float)
_MOMENT_MEAN = np.array([-1.504, -1.514, -1.522, -1.520, -1.526,
                         -1.523, -1.527, -1.519, -1.524, -1.532])
_MOMENT_VAR = np.array([1.069, 0.923, 0.851, 0.809, 0.789,
                        0.770, 0.760, 0.749, 0.736, 0.735])


def t_moments(n_obs):
    """Null mean and variance of the t-statistic for ``n_obs`` regression rows.

    Linear interpolation between table entries, held flat outside the table.
    """
    n = np.asarray(n_obs, dtype=float)
    return np.interp(n, _MOMENT_OBS, _MOMENT_MEAN), np.interp(n, _MOMENT_OBS, _MOMENT_VAR)


def _adf_design(y, lags):
    dy = np.diff(y)
    rows = dy.size - lags
    cols = [np.ones(rows), y[lags:-1]]
    for j in range(1, lags + 1):
        cols.append(dy[lags - j:dy.size - j])
    return np.column_stack(cols), dy[lags:]


def adf_t(series, lags=0):
    """t-statistic on the lagged level in an augmented Dickey-Fuller regression.

    ``diff(y)[t] = a + r * y[t-1] + sum_j d_j * diff(y)[t-j] + e[t]``.

    Parameters
    ----------
    series : array_like
        Observations in time order, no gaps.
    lags : int
        Number of lagged differences.

    Returns
    -------
    float
    """
    y = np.asarray(series, dtype=float).ravel()
    if lags < 0:
        raise InvalidInput("lags must be nonnegative")
    if not np.all(np.isfinite(y)):
        raise InvalidInput("series contains non-finite values")
    if y.size < lags + MIN_LENGTH:
        raise TooShort(f"need at least {lags + MIN_LENGTH} observations, got {y.size}")
    X, d = _adf_design(y, lags)
    Q, R = np.linalg.qr(X)
    coef = np.linalg.solve(R, Q.T @ d)
    resid = d - X @ coef
    dof = X.shape[0] - X.shape[1]
    s2 = float(resid @ resid) / dof
    scale = max(float(d @ d), float(np.var(y)) * y.size, 1e-300)
    if s2 * dof <= 1e-24 * scale:
        raise DegenerateSeries("Dickey-Fuller regression fits exactly")
    Rinv = np.linalg.inv(R)
    var_r = s2 * float(Rinv[1] @ Rinv[1])
    return float(coef[1] / math.sqrt(var_r))


def adf_t_batch(Y):
    """Lag-zero Dickey-Fuller t-statistics for every row of ``Y`` at once."""
    Y = np.asarray(Y, dtype=float)
    x = Y[:, :-1]
    d = np.diff(Y, axis=1)
    xc = x - x.mean(axis=1, keepdims=True)
    dc = d - d.mean(axis=1, keepdims=True)
    sxx = np.einsum("ij,ij->i", xc, xc)
    r = np.einsum("ij,ij->i", xc, dc) / sxx
    resid = dc - r[:, None] * xc
    s2 = np.einsum("ij,ij->i", resid, resid) / (d.shape[1] - 2)
    return r / np.sqrt(s2 / sxx)


def ips_statistic(t_stats, n_obs):
    """Standardized average of country t-statistics and its lower-tail p-value."""
    t = np.asarray(t_stats, dtype=float)
    mean, var = t_moments(n_obs)
    mean, var = np.broadcast_to(mean, t.shape), np.broadcast_to(var, t.shape)
    stat = math.sqrt(t.shape[-1]) * (t.mean(axis=-1) - mean.mean(axis=-1)) / np.sqrt(var.mean(axis=-1))
    return stat, ndtr(stat)


@dataclass
class IpsResult:
    """Panel statistic with per-country detail.

    ``t_stats`` is indexed by country; ``skipped`` maps a country to the reason
    it was left out.
    """

    statistic: float
    p_value: float
    t_stats: pd.Series
    n_obs: pd.Series
    lags: int
    skipped: dict = field(default_factory=dict)

    @property
    def used(self):
        return list(self.t_stats.index)

    def reject(self, level=0.05):
        return self.p_value < level

    def detail(self):
        mean, var = t_moments(self.n_obs.to_numpy())
        return pd.DataFrame({"t": self.t_stats, "n_obs": self.n_obs,
                             "null_mean": mean, "null_var": var})

    def summary(self):
        return {"null": "all series have a unit root", "statistic": self.statistic,
                "p_value": self.p_value, "countries_used": len(self.t_stats),
                "countries_skipped": len(self.skipped), "lags": self.lags}


def _split_series(data, value):
    if isinstance(data, pd.DataFrame):
        cols = {"country", "year", value}
        if not cols <= set(data.columns):
            raise InvalidInput(f"series table needs columns {sorted(cols)}")
        out = {}
        for c, g in data.sort_values(["country", "year"]).groupby("country", sort=True):
            g = g.dropna(subset=[value])
            years = g["year"].to_numpy()
            v = g[value].to_numpy(dtype=float)
            # keep the longest run of consecutive years; gaps break the series
            breaks = np.flatnonzero(np.diff(years) != 1) + 1
            runs = np.split(np.arange(v.size), breaks)
            best = max(runs, key=len) if runs else np.arange(0)
            out[str(c)] = v[best]
        return out
    return {str(k): np.asarray(v, dtype=float) for k, v in dict(data).items()}


def ips_test(data, lags=0, min_length=MIN_LENGTH, value="value"):
    """Im-Pesaran-Shin test on an unbalanced panel.

    Parameters
    ----------
    data : DataFrame or mapping
        Long table with ``country, year`` and a value column, or a mapping from
        country to a 1-D series.
    lags : int
        Lagged differences in each country's regression.
    min_length : int
        Countries with fewer than ``max(min_length, lags + 10)`` observations are
        skipped.
    value : str
        Value column for tabular input.

    Returns
    -------
    IpsResult
    """
    series = _split_series(data, value)
    need = max(int(min_length), lags + MIN_LENGTH)
    t_stats, n_obs, skipped = {}, {}, {}
    for c in sorted(series):
        y = series[c]
        if y.size < need:
            skipped[c] = f"length {y.size} < {need}"
            continue
        try:
            t_stats[c] = adf_t(y, lags)
        except DegenerateSeries:
            skipped[c] = "degenerate"
            continue
        n_obs[c] = y.size - 1 - lags
    if len(t_stats) < 2:
        raise NoUsableSeries(f"{len(t_stats)} usable series; need at least 2")
    t = pd.Series(t_stats, name="t")
    n = pd.Series(n_obs, name="n_obs")
    stat, p = ips_statistic(t.to_numpy(), n.to_numpy())
    return IpsResult(statistic=float(stat), p_value=float(p), t_stats=t, n_obs=n,
                     lags=int(lags), skipped=skipped)


def rejection_rate(generate, n_reps=500, n_countries=50, length=60, level=0.05, seed=0):
    """Share of simulated panels in which the test rejects at ``level``.

    ``generate(rng, shape)`` returns an array of series, one per row.
    """
    rng = np.random.default_rng(seed)
    Y = generate(rng, (n_reps, n_countries, length))
    t = adf_t_batch(Y.reshape(-1, length)).reshape(n_reps, n_countries)
    _, p = ips_statistic(t, np.full(t.shape, length - 1))
    return float(np.mean(p < level))
