"""Two-stage error-correction estimation.

Stage one regresses ``lny`` on ``lnk``, climate terms and two-way (country and
year) fixed effects; its residual ``V`` is the output gap. Stage two regresses
``diff(lny)`` on differenced anomaly terms, the lagged gap ``V[t-1]`` and
country effects. Both stages report country-clustered covariances.

The sign of the gap coefficient is left to the data. For a gap that closes
at rate ``s`` the coefficient is ``-s``; :attr:`EcmResult.adjustment_speed`
reports ``s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DataError, EmptyDesign, MissingGap
from .modelspec import Term, _check_rank, term_columns


def _cluster_cov(X, resid, clusters):
    """``(X'X)^-1 (sum_c X_c' e_c e_c' X_c) (X'X)^-1``."""
    XtX_inv = np.linalg.inv(X.T @ X)
    S = X * resid[:, None]
    Sc = np.zeros((int(clusters.max()) + 1, X.shape[1]))
    np.add.at(Sc, clusters, S)
    V = XtX_inv @ (Sc.T @ Sc) @ XtX_inv
    return 0.5 * (V + V.T)


def demean(M, codes, tol=1e-13, max_iter=100_000):
    """Project out one or more sets of group dummies by alternating projections.

    One set of codes is an exact one-pass within transformation; two sets
    (country and year) iterate until the largest change falls below ``tol``
    relative to the scale of ``M``.
    """
    M = np.array(M, dtype=float, copy=True)
    counts = [np.bincount(c) for c in codes]
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    for _ in range(max_iter):
        change = 0.0
        for c, n in zip(codes, counts):
            means = np.zeros((n.size, M.shape[1]))
            np.add.at(means, c, M)
            means /= n[:, None]
            M -= means[c]
            change = max(change, float(np.max(np.abs(means))))
        if len(codes) == 1 or change < tol * scale:
            return M
    raise DataError("two-way demeaning did not converge")


def _two_way_effects(fitted, ccode, ycode, nc, ny):
    """Country and year effects with the first year's effect set to zero."""
    a = np.zeros(nc)
    b = np.zeros(ny)
    cn, yn = np.bincount(ccode, minlength=nc), np.bincount(ycode, minlength=ny)
    for _ in range(100_000):
        a_new = np.bincount(ccode, fitted - b[ycode], minlength=nc) / cn
        b_new = np.bincount(ycode, fitted - a_new[ccode], minlength=ny) / yn
        shift = b_new[0]
        a_new, b_new = a_new + shift, b_new - shift
        done = max(np.max(np.abs(a_new - a)), np.max(np.abs(b_new - b))) < 1e-13 * max(1.0, np.max(np.abs(fitted)))
        a, b = a_new, b_new
        if done:
            break
    return a, b


def _gaussian_loglik(resid):
    n = resid.size
    s2 = float(resid @ resid) / n
    return -0.5 * n * (math.log(2 * math.pi * s2) + 1.0)


def _codes(labels):
    groups = sorted(set(labels))
    index = {g: i for i, g in enumerate(groups)}
    return groups, np.array([index[g] for g in labels], dtype=np.int64)


def _as_terms(terms):
    return tuple(t if isinstance(t, Term) else Term.parse(t) for t in terms)


@dataclass
class CointResult:
    """Long-run coefficients, two-way effects and the gap series ``V``."""

    names: list
    theta: np.ndarray
    cov: np.ndarray
    country_effects: pd.Series
    year_effects: pd.Series
    V: pd.DataFrame
    loglik: float
    n_obs: int

    @property
    def se(self):
        return np.sqrt(np.diag(self.cov))

    def table(self):
        return pd.DataFrame({"coef": self.theta, "se": self.se, "t": self.theta / self.se},
                            index=pd.Index(self.names, name="parameter"))

    def coef(self, name):
        return float(self.theta[self.names.index(name)])


def fit_cointegrating_vector(panel, terms=("lnk",)):
    """Least squares of ``lny`` on long-run terms plus country and year dummies.

    Parameters
    ----------
    panel : DataFrame
        Needs ``country``, ``year``, ``lny`` and every variable in ``terms``.
    terms : sequence of str or Term
        Long-run regressors, e.g. ``("lnk", "T", "T^2", "R", "R^2", "P*R")``.
    """
    terms = _as_terms(terms)
    p = panel.reset_index(drop=True)
    countries = p["country"].astype(str).to_numpy()
    years = p["year"].to_numpy(dtype=np.int64)
    cgroups, ccode = _codes(countries)
    ygroups, ycode = _codes(years)
    if len(cgroups) < 2 or len(ygroups) < 2:
        raise DataError("two-way effects need at least 2 countries and 2 years")

    cols, names = [], []
    for t in terms:
        cols += term_columns(p, t, "abs")
        names += t.labels("abs")
    X = np.column_stack(cols)
    y = p["lny"].to_numpy(dtype=float)
    Xw = demean(X, [ccode, ycode])
    yw = demean(y[:, None], [ccode, ycode])[:, 0]
    _check_rank(Xw, names, "X")
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    resid = yw - Xw @ coef
    cov = _cluster_cov(Xw, resid, ccode)

    # recover the two-way effects from the part of y the slopes leave unexplained
    ce, ye = _two_way_effects(y - X @ coef - resid, ccode, ycode, len(cgroups), len(ygroups))
    V = pd.DataFrame({"country": countries, "year": years, "V": resid})
    return CointResult(
        names=names, theta=coef, cov=cov,
        country_effects=pd.Series(ce, index=cgroups, name="mu_c"),
        year_effects=pd.Series(ye, index=ygroups, name="mu_t"),
        V=V.sort_values(["country", "year"], ignore_index=True),
        loglik=_gaussian_loglik(resid), n_obs=len(p),
    )


@dataclass
class EcmResult:
    """Short-run coefficients; ``gap`` is the coefficient on ``V[t-1]``."""

    names: list
    psi: np.ndarray
    cov: np.ndarray
    loglik: float
    n_obs: int
    residuals: pd.DataFrame

    @property
    def se(self):
        return np.sqrt(np.diag(self.cov))

    def coef(self, name):
        return float(self.psi[self.names.index(name)])

    @property
    def gap(self):
        return self.coef("gap")

    @property
    def adjustment_speed(self):
        return -self.gap

    def half_life(self):
        return half_life(self.gap)

    def table(self):
        return pd.DataFrame({"coef": self.psi, "se": self.se, "t": self.psi / self.se},
                            index=pd.Index(self.names, name="parameter"))


def fit_short_run(panel, V, terms=("zT", "zR"), form="z"):
    """Least squares of ``diff(lny)`` on differenced anomaly terms, ``V[t-1]`` and country effects.

    Parameters
    ----------
    panel : DataFrame
    V : DataFrame or CointResult
        Gap series keyed by ``country, year``.
    terms : sequence of str
        Anomaly terms such as ``"zT"`` or ``"P*zT"``; each enters in first
        differences. Terms whose differences are identically zero are dropped.
    form : {"z", "abs"}
        Use signed anomalies or their absolute values.
    """
    if isinstance(V, CointResult):
        V = V.V
    transform = {"z": "identity", "abs": "abs"}[form]
    terms = _as_terms(terms)
    p = panel.sort_values(["country", "year"]).reset_index(drop=True)
    country = p["country"].astype(str).to_numpy()
    year = p["year"].to_numpy(dtype=np.int64)
    has_prev = np.zeros(len(p), dtype=bool)
    has_prev[1:] = (country[1:] == country[:-1]) & (year[1:] == year[:-1] + 1)
    idx = np.flatnonzero(has_prev)
    if idx.size == 0:
        raise EmptyDesign("no consecutive country-years")

    gap = V.set_index(["country", "year"])["V"]
    gap.index = gap.index.set_levels([gap.index.levels[0].astype(str), gap.index.levels[1]])
    keys = pd.MultiIndex.from_arrays([country[idx - 1], year[idx - 1]])
    lag = gap.reindex(keys).to_numpy(dtype=float)
    if np.isnan(lag).any():
        j = int(np.flatnonzero(np.isnan(lag))[0])
        raise MissingGap(f"no gap value for ({keys[j][0]}, {keys[j][1]})")

    cols, names = [], []
    for t in terms:
        for c, label in zip(term_columns(p, t, transform), t.labels(transform)):
            dc = c[idx] - c[idx - 1]
            if np.any(dc != 0):
                cols.append(dc)
                names.append(f"D.{label}")
    cols.append(lag)
    names.append("gap")
    groups, code = _codes(country[idx])
    X = demean(np.column_stack(cols), [code])
    _check_rank(X, names, "X")
    lny = p["lny"].to_numpy(dtype=float)
    y = demean((lny[idx] - lny[idx - 1])[:, None], [code])[:, 0]
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    cov = _cluster_cov(X, resid, code)
    res = pd.DataFrame({"country": country[idx], "year": year[idx], "w": resid})
    return EcmResult(names=names, psi=coef, cov=cov,
                     loglik=_gaussian_loglik(resid), n_obs=int(idx.size), residuals=res)


def impulse_response(gap_coef, horizon=100):
    """Remaining share of a unit gap after 0..horizon years: ``(1 + gap_coef)**h``."""
    path = np.empty(horizon + 1)
    path[0] = 1.0
    for h in range(1, horizon + 1):
        path[h] = path[h - 1] * (1.0 + gap_coef)
    return path


def half_life(gap_coef, horizon=1000):
    """Years until half of a gap shock is gone, read off the simulated impulse response.

    An overshooting response (``gap_coef < -1``) is measured by its absolute size.
    """
    path = np.abs(impulse_response(gap_coef, horizon))
    below = np.flatnonzero(path <= 0.5)
    if below.size == 0:
        return math.inf
    h = int(below[0])
    if path[h] == 0.0:
        return h - 1 + (path[h - 1] - 0.5) / path[h - 1]
    # log-linear interpolation between the bracketing years
    lo, hi = math.log(path[h - 1]), math.log(path[h])
    return h - 1 + (lo - math.log(0.5)) / (lo - hi)


def simulate_ecm_panel(n_countries=50, n_years=400, speed=0.06, theta=0.6, psi_T=-0.002,
                       sigma_w=0.02, seed=0, start_year=1900):
    """Cointegrated synthetic panel whose gap closes at rate ``speed``.

    ``lny = mu_c + mu_t + theta * lnk + V`` with ``lnk`` a random walk and
    ``V[t] = (1 - speed) V[t-1] + psi_T * diff(zT)[t] + w[t]``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    width = len(str(n_countries - 1))
    countries = [f"C{i:0{width}d}" for i in range(n_countries)]
    years = np.arange(start_year, start_year + n_years)
    mu_c = rng.normal(8.0, 1.0, n_countries)
    mu_t = 0.015 * np.arange(n_years)
    lnk = rng.normal(10.0, 1.0, n_countries)[:, None] + np.cumsum(
        rng.normal(0.02, 0.04, (n_countries, n_years)), axis=1)
    zT = rng.standard_normal((n_countries, n_years))
    zR = rng.standard_normal((n_countries, n_years))
    w = rng.normal(0.0, sigma_w, (n_countries, n_years))
    V = np.zeros((n_countries, n_years))
    dzT = np.diff(zT, axis=1, prepend=zT[:, :1])
    for j in range(n_years):
        prev = V[:, j - 1] if j else rng.normal(0.0, sigma_w / math.sqrt(1 - (1 - speed) ** 2), n_countries)
        V[:, j] = (1 - speed) * prev + psi_T * dzT[:, j] + w[:, j]
    lny = mu_c[:, None] + mu_t[None, :] + theta * lnk + V
    return pd.DataFrame({
        "country": np.repeat(countries, n_years),
        "year": np.tile(years, n_countries),
        "lny": lny.ravel(), "lnk": lnk.ravel(),
        "zT": zT.ravel(), "zR": zR.ravel(), "V_true": V.ravel(),
    })
