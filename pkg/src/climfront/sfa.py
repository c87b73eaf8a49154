"""True-fixed-effects stochastic frontier with heteroskedastic inefficiency.

Model, row by row::

    y = X @ beta + v - u
    v ~ Normal(0, sigma_v**2)
    u ~ Exponential(mean sigma_u)      or   sigma_u * |Normal(0, 1)|
    sigma_u = exp(Z @ gamma)

Country effects are ordinary columns of ``X`` (see :mod:`climfront.modelspec`).
The parameter vector is packed as ``[beta, ln_sigma_v, gamma]``.

The log link keeps ``sigma_u`` positive for any real ``gamma``, so the
likelihood is maximised without constraints.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import optimize, special

from .errors import (
    DimensionError,
    InvalidInput,
    MissingVariable,
    NonConvergence,
    SingularHessian,
)
from .modelspec import Term, _canonical, build_design, format_spec

LOG_2PI = math.log(2.0 * math.pi)
SQRT2 = math.sqrt(2.0)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
BOUNDARY_GAMMA0 = -10.0
# gamma_0 reported for a boundary fit: sigma_u = exp(-30) is numerically zero
LIMIT_GAMMA0 = -30.0
FORMAT_VERSION = 1


# --------------------------------------------------------------------------
# scalar building blocks
# --------------------------------------------------------------------------

def _mills(w):
    """phi(w) / Phi(w), stable for large negative ``w``."""
    with np.errstate(over="ignore"):
        return SQRT_2_OVER_PI / special.erfcx(-w / SQRT2)


def _check_inputs(eps, sigma_v, sigma_u):
    eps, sigma_v, sigma_u = np.broadcast_arrays(
        np.asarray(eps, dtype=float), np.asarray(sigma_v, dtype=float), np.asarray(sigma_u, dtype=float)
    )
    if not (np.all(np.isfinite(eps)) and np.all(np.isfinite(sigma_v)) and np.all(np.isfinite(sigma_u))):
        raise InvalidInput("non-finite residual or scale")
    if np.any(sigma_v <= 0) or np.any(sigma_u <= 0):
        raise InvalidInput("scales must be positive")
    return eps, sigma_v, sigma_u


def _exp_parts(eps, a, b):
    """Log-density and its derivatives wrt eps, ln sigma_v, ln sigma_u (exponential u)."""
    sv, isu = np.exp(a), np.exp(-b)
    r = np.exp(a - b)
    w = -eps / sv - r
    # ln Phi(w) = ln(erfcx(-w/sqrt2)/2) - w^2/2 removes the cancellation against r^2/2
    with np.errstate(over="ignore"):
        neg = w < 0
        stable = -b - 0.5 * (eps / sv) ** 2 + np.log(0.5 * special.erfcx(np.where(neg, -w, 0.0) / SQRT2))
    direct = -b + 0.5 * r * r + eps * isu + special.log_ndtr(w)
    ll = np.where(neg, stable, direct)
    m = _mills(w)
    kappa = w + m
    d_eps = -eps / sv**2 - kappa / sv
    d_a = (eps / sv) ** 2 + kappa * (eps / sv - r)
    d_b = -1.0 + kappa * r
    return ll, d_eps, d_a, d_b


def _hn_parts(eps, a, b):
    """Log-density and derivatives for half-normal u."""
    e2a, e2b = np.exp(2 * a), np.exp(2 * b)
    s2 = e2a + e2b
    s = np.sqrt(s2)
    lam = np.exp(b - a)
    q = -eps * lam / s
    ll = math.log(2.0) - 0.5 * LOG_2PI - 0.5 * np.log(s2) - 0.5 * eps**2 / s2 + special.log_ndtr(q)
    mq = _mills(q) * q
    d_eps = -eps / s2 - _mills(q) * lam / s
    d_a = -e2a / s2 + eps**2 * e2a / s2**2 + mq * (-1.0 - e2a / s2)
    d_b = -e2b / s2 + eps**2 * e2b / s2**2 + mq * (1.0 - e2b / s2)
    return ll, d_eps, d_a, d_b


_PARTS = {"exponential": _exp_parts, "halfnormal": _hn_parts}


def loglik_obs_exponential(eps, sigma_v, sigma_u):
    """Log-density of ``eps = v - u`` with normal ``v`` and exponential ``u`` of mean ``sigma_u``.

    ``-ln su + sv^2 / (2 su^2) + eps / su + ln Phi(-eps / sv - sv / su)``
    """
    eps, sigma_v, sigma_u = _check_inputs(eps, sigma_v, sigma_u)
    out = _exp_parts(eps, np.log(sigma_v), np.log(sigma_u))[0]
    return out if out.ndim else float(out)


def loglik_obs_halfnormal(eps, sigma_v, sigma_u):
    """Log-density of ``eps = v - u`` with half-normal ``u`` of scale ``sigma_u``."""
    eps, sigma_v, sigma_u = _check_inputs(eps, sigma_v, sigma_u)
    out = _hn_parts(eps, np.log(sigma_v), np.log(sigma_u))[0]
    return out if out.ndim else float(out)


def loglik_obs(eps, sigma_v, sigma_u, dist="exponential"):
    if dist == "exponential":
        return loglik_obs_exponential(eps, sigma_v, sigma_u)
    if dist == "halfnormal":
        return loglik_obs_halfnormal(eps, sigma_v, sigma_u)
    raise InvalidInput(f"unknown distribution {dist!r}")


# --------------------------------------------------------------------------
# parameters and likelihood over a design
# --------------------------------------------------------------------------

@dataclass
class Params:
    beta: np.ndarray
    ln_sigma_v: float
    gamma: np.ndarray

    @property
    def sigma_v(self):
        return math.exp(self.ln_sigma_v)

    def pack(self):
        return np.concatenate([np.asarray(self.beta, float), [self.ln_sigma_v], np.asarray(self.gamma, float)])

    @classmethod
    def unpack(cls, theta, design):
        theta = np.asarray(theta, dtype=float)
        kx, kz = design.X.shape[1], design.Z.shape[1]
        if theta.shape != (kx + 1 + kz,):
            raise DimensionError(f"expected {kx + 1 + kz} parameters, got {theta.shape}")
        return cls(theta[:kx].copy(), float(theta[kx]), theta[kx + 1:].copy())


def _theta(params, design):
    theta = params.pack() if isinstance(params, Params) else np.asarray(params, dtype=float)
    kx, kz = design.X.shape[1], design.Z.shape[1]
    if theta.shape != (kx + 1 + kz,):
        raise DimensionError(f"expected {kx + 1 + kz} parameters, got {theta.shape}")
    if design.Z.shape[0] != design.n or design.X.shape[0] != design.n:
        raise DimensionError("X, Z and y row counts differ")
    return theta


def _dist(design, dist):
    if dist is not None:
        return dist
    return design.spec.distribution if design.spec is not None else "exponential"


def _evaluate(theta, design, dist):
    kx = design.X.shape[1]
    beta, a, gamma = theta[:kx], theta[kx], theta[kx + 1:]
    eps = design.y - design.X @ beta
    b = design.Z @ gamma
    return eps, a, b, _PARTS[dist](eps, a, b)


def total_loglik(params, design, dist=None):
    """Sum of per-row log-densities at ``eps = y - X beta`` and ``sigma_u = exp(Z gamma)``."""
    theta = _theta(params, design)
    return float(np.sum(_evaluate(theta, design, _dist(design, dist))[3][0]))


def scores(params, design, dist=None):
    """Per-row score contributions, shape ``(n, n_params)``."""
    theta = _theta(params, design)
    _, _, _, (_, d_eps, d_a, d_b) = _evaluate(theta, design, _dist(design, dist))
    return np.hstack([-design.X * d_eps[:, None], d_a[:, None], design.Z * d_b[:, None]])


def _loglik_and_grad(theta, design, dist):
    _, _, _, (ll, d_eps, d_a, d_b) = _evaluate(theta, design, dist)
    g = np.concatenate([-(design.X.T @ d_eps), [np.sum(d_a)], design.Z.T @ d_b])
    return float(np.sum(ll)), g


def gradient(params, design, dist=None):
    """Analytic gradient of :func:`total_loglik`."""
    theta = _theta(params, design)
    return _loglik_and_grad(theta, design, _dist(design, dist))[1]


def _fd_hessian(grad, theta, rel_step=1e-5):
    p = theta.size
    H = np.empty((p, p))
    for j in range(p):
        h = rel_step * max(1.0, abs(theta[j]))
        tp, tm = theta.copy(), theta.copy()
        tp[j] += h
        tm[j] -= h
        H[:, j] = (grad(tp) - grad(tm)) / (2 * h)
    return 0.5 * (H + H.T)


def hessian(params, design, dist=None, rel_step=1e-5):
    """Hessian of the log-likelihood by central differences of the analytic gradient."""
    theta = _theta(params, design)
    dist = _dist(design, dist)
    return _fd_hessian(lambda t: _loglik_and_grad(t, design, dist)[1], theta, rel_step)


# --------------------------------------------------------------------------
# robust covariance
# --------------------------------------------------------------------------

def cluster_robust_cov(params, design, cluster=True, dist=None, H=None):
    """Sandwich covariance ``H^-1 (sum_c s_c s_c') H^-1``.

    ``s_c`` is the score summed over the rows of cluster ``c`` (country); with
    ``cluster=False`` every row is its own cluster.
    """
    theta = _theta(params, design)
    dist = _dist(design, dist)
    if H is None:
        H = hessian(theta, design, dist)
    evals = np.linalg.eigvalsh(-H)
    if not np.all(np.isfinite(evals)) or evals.min() <= 1e-12 * max(1.0, abs(evals.max())):
        raise SingularHessian("Hessian is not negative definite at these parameters")
    Hinv = np.linalg.inv(H)
    S = scores(theta, design, dist)
    if cluster:
        Sc = np.zeros((int(design.clusters.max()) + 1, S.shape[1]))
        np.add.at(Sc, design.clusters, S)
    else:
        Sc = S
    meat = Sc.T @ Sc
    V = Hinv @ meat @ Hinv
    return 0.5 * (V + V.T)


# --------------------------------------------------------------------------
# inefficiency decomposition
# --------------------------------------------------------------------------

def jondrow(eps, sigma_v, sigma_u, dist="exponential"):
    """Conditional mean of inefficiency given the composed residual, E[u | eps]."""
    eps, sigma_v, sigma_u = _check_inputs(eps, sigma_v, sigma_u)
    if dist == "exponential":
        mu = -eps - sigma_v**2 / sigma_u
        s = sigma_v
    elif dist == "halfnormal":
        s2 = sigma_v**2 + sigma_u**2
        mu = -eps * sigma_u**2 / s2
        s = sigma_v * sigma_u / np.sqrt(s2)
    else:
        raise InvalidInput(f"unknown distribution {dist!r}")
    out = mu + s * _mills(mu / s)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# estimation
# --------------------------------------------------------------------------

@dataclass
class FitResult:
    """Estimates, robust covariance and per-row diagnostics of a frontier fit."""

    params: Params
    names: list
    cov: np.ndarray
    loglik: float
    loglik_init: float
    eps: np.ndarray
    sigma_u: np.ndarray
    e_u: np.ndarray
    iterations: int
    grad_norm: float
    status: str
    distribution: str = "exponential"
    x_names: list = field(default_factory=list)
    z_names: list = field(default_factory=list)
    countries: np.ndarray = None
    years: np.ndarray = None
    n_obs: int = 0
    n_clusters: int = 0
    spec_text: str = ""

    @property
    def theta(self):
        return self.params.pack()

    @property
    def se(self):
        return np.sqrt(np.clip(np.diag(self.cov), 0, None))

    @property
    def tstat(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.theta / self.se

    def coef(self, name):
        return float(self.theta[self.names.index(name)])

    def coefs(self):
        return dict(zip(self.names, self.theta.tolist()))

    @property
    def beta(self):
        return dict(zip(self.x_names, self.params.beta.tolist()))

    @property
    def gamma(self):
        return dict(zip(self.z_names, self.params.gamma.tolist()))

    def table(self, include_fe=False):
        """Coefficient, robust SE and t-statistic per parameter."""
        df = pd.DataFrame({"coef": self.theta, "se": self.se, "t": self.tstat}, index=self.names)
        df.index.name = "parameter"
        if not include_fe:
            df = df[~df.index.str.startswith("fe[")]
        return df

    def observations(self):
        return pd.DataFrame({
            "country": self.countries, "year": self.years, "eps": self.eps,
            "sigma_u": self.sigma_u, "E_u_given_eps": self.e_u,
        })

    def to_dict(self):
        return {
            "format": "climfront-fit", "version": FORMAT_VERSION,
            "distribution": self.distribution, "status": self.status,
            "loglik": self.loglik, "loglik_init": self.loglik_init,
            "iterations": self.iterations, "grad_norm": self.grad_norm,
            "n_obs": self.n_obs, "n_clusters": self.n_clusters,
            "x_names": list(self.x_names), "z_names": list(self.z_names),
            "beta": self.params.beta.tolist(), "ln_sigma_v": self.params.ln_sigma_v,
            "gamma": self.params.gamma.tolist(), "cov": self.cov.tolist(),
            "spec": self.spec_text,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "climfront-fit":
            raise InvalidInput("not a climfront fit document")
        if d.get("version") != FORMAT_VERSION:
            raise InvalidInput(f"unsupported fit document version {d.get('version')}")
        params = Params(np.array(d["beta"]), float(d["ln_sigma_v"]), np.array(d["gamma"]))
        names = list(d["x_names"]) + ["ln_sigma_v"] + ["ineff:" + z for z in d["z_names"]]
        empty = np.array([])
        return cls(params=params, names=names, cov=np.array(d["cov"]), loglik=d["loglik"],
                   loglik_init=d["loglik_init"], eps=empty, sigma_u=empty, e_u=empty,
                   iterations=d["iterations"], grad_norm=d["grad_norm"], status=d["status"],
                   distribution=d["distribution"], x_names=list(d["x_names"]),
                   z_names=list(d["z_names"]), n_obs=d["n_obs"], n_clusters=d["n_clusters"],
                   spec_text=d.get("spec", ""))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def initial_params(design):
    """OLS frontier, ``sigma_v = 0.8 s``, ``gamma_0 = ln(0.6 s)``, other ``gamma = 0``."""
    beta, *_ = np.linalg.lstsq(design.X, design.y, rcond=None)
    resid = design.y - design.X @ beta
    s = float(np.std(resid))
    s = s if s > 0 else 1e-3
    gamma = np.zeros(design.Z.shape[1])
    gamma[0] = math.log(0.6 * s)
    return Params(beta, math.log(0.8 * s), gamma)


def _scales(design):
    sx = np.sqrt(np.mean(design.X**2, axis=0))
    sz = np.sqrt(np.mean(design.Z**2, axis=0))
    sx[sx == 0] = 1.0
    sz[sz == 0] = 1.0
    return np.concatenate([sx, [1.0], sz])


def _maximize(theta0, design, dist, max_iter, gtol):
    """Quasi-Newton ascent followed by Newton polishing; returns (theta, loglik, grad, iters)."""
    scale = _scales(design)
    n = design.n

    def negf(tt):
        ll, g = _loglik_and_grad(tt / scale, design, dist)
        if not np.isfinite(ll):
            return np.inf, np.zeros_like(tt)
        return -ll / n, -(g / scale) / n

    res = optimize.minimize(negf, theta0 * scale, jac=True, method="L-BFGS-B",
                            options={"maxiter": max_iter, "gtol": 1e-10, "ftol": 1e-15, "maxcor": 30})
    tt = res.x
    iters = int(res.nit)
    f, g = negf(tt)
    for _ in range(50):
        if np.max(np.abs(g * scale)) * n < gtol:
            break
        H = _fd_hessian(lambda t: negf(t)[1], tt)
        try:
            step = -np.linalg.solve(H, g)
            if not np.all(np.isfinite(step)) or np.dot(step, g) >= 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = -g
        t = 1.0
        improved = False
        while t > 1e-10:
            f_new, g_new = negf(tt + t * step)
            if f_new <= f + 1e-4 * t * np.dot(g, step):
                improved = True
                break
            t *= 0.5
        iters += 1
        if not improved:
            break
        tt, f, g = tt + t * step, f_new, g_new
    theta = tt / scale
    ll, grad = _loglik_and_grad(theta, design, dist)
    return theta, ll, grad, iters


def fit(design, max_iter=500, gtol=1e-6, multistart=3, seed=0, dist=None, cluster=True,
        covariance=True):
    """Maximum-likelihood estimate of the frontier model.

    Parameters
    ----------
    design : Design
    max_iter : int
        Iteration cap for the quasi-Newton stage.
    gtol : float
        Convergence threshold on the max-norm of the log-likelihood gradient.
    multistart : int
        Number of starts; starts after the first shift the initial
        ``gamma_0`` by +0.5, -0.5, then uniformly within +-0.5.
    cluster : bool
        Cluster the sandwich covariance by country (default) or by row.

    Returns
    -------
    FitResult
        ``status`` is ``"converged"``, or ``"boundary"`` when ``gamma_0`` ends
        below -10 or the vanishing-inefficiency limit (the Gaussian
        least-squares likelihood) is at least as high as the best interior
        optimum. A boundary fit reports the least-squares frontier,
        ``gamma_0 = -30`` and zero for the other inefficiency coefficients.

    Raises
    ------
    NonConvergence
        Gradient criterion not met away from the boundary.
    """
    dist = _dist(design, dist)
    init = initial_params(design)
    theta_init = init.pack()
    ll_init = _loglik_and_grad(theta_init, design, dist)[0]
    kx = design.X.shape[1]

    rng = np.random.default_rng(seed)
    best = None
    for k in range(max(1, multistart)):
        theta0 = theta_init.copy()
        if k == 1:
            theta0[kx + 1] += 0.5
        elif k == 2:
            theta0[kx + 1] -= 0.5
        elif k > 2:
            theta0[kx + 1] += rng.uniform(-0.5, 0.5)
        theta, ll, g, iters = _maximize(theta0, design, dist, max_iter, gtol)
        gnorm = float(np.max(np.abs(g)))
        # ties (within 1e-9) go to the smaller gradient
        if best is None or ll > best[0] + 1e-9 or (abs(ll - best[0]) <= 1e-9 and gnorm < best[1]):
            best = (ll, gnorm, theta, iters)
    ll, gnorm, theta, iters = best

    # as sigma_u -> 0 the likelihood tends to the normal least-squares one
    ols = initial_params(design).beta
    rss = float(np.sum((design.y - design.X @ ols) ** 2))
    ll_limit = -0.5 * design.n * (LOG_2PI + math.log(rss / design.n) + 1.0) if rss > 0 else -np.inf
    if ll_limit >= ll - 1e-9 * max(1.0, abs(ll)):
        gamma = np.zeros(design.Z.shape[1])
        gamma[0] = LIMIT_GAMMA0
        theta = np.concatenate([ols, [0.5 * math.log(rss / design.n)], gamma])
        ll, g = _loglik_and_grad(theta, design, dist)
        gnorm = float(np.max(np.abs(g)))
    params = Params.unpack(theta, design)

    if params.gamma[0] < BOUNDARY_GAMMA0:
        status = "boundary"
    elif gnorm < gtol:
        status = "converged"
    else:
        raise NonConvergence(f"gradient max-norm {gnorm:.3g} above tolerance {gtol:g}", last=params)

    names = design.param_names()
    if covariance and status == "converged":
        cov = cluster_robust_cov(theta, design, cluster=cluster, dist=dist)
    else:
        cov = np.full((theta.size, theta.size), np.nan)

    eps = design.y - design.X @ params.beta
    sigma_u = np.exp(design.Z @ params.gamma)
    e_u = jondrow(eps, params.sigma_v, sigma_u, dist)
    return FitResult(
        params=params, names=names, cov=cov, loglik=ll, loglik_init=ll_init, eps=eps,
        sigma_u=sigma_u, e_u=np.atleast_1d(e_u), iterations=iters, grad_norm=gnorm,
        status=status, distribution=dist, x_names=list(design.x_names),
        z_names=list(design.z_names), countries=design.countries, years=design.years,
        n_obs=design.n, n_clusters=len(np.unique(design.clusters)),
        spec_text=format_spec(design.spec) if design.spec is not None else "",
    )


# --------------------------------------------------------------------------
# simulation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WeatherProcess:
    """Synthetic climate: per-country normals drifting linearly, iid standard-normal anomalies.

    Normals and their standard deviations are known exactly, so the anomalies
    fed to the model are the simulated standard-normal draws.
    """

    temp_range: tuple = (-2.0, 29.0)
    warming_range: tuple = (0.0, 0.03)
    tau_range: tuple = (0.3, 1.0)
    rain_range: tuple = (1.0, 20.0)
    rain_drift_range: tuple = (-0.02, 0.02)
    rho_fraction: float = 0.1
    poor_share: float = 0.66


def simulate_covariates(n_countries, n_years, rng, weather=None, start_year=1955):
    """Country-year regressors: lnk, climate normals, anomalies and P/H dummies."""
    from .dataio import classify_hot

    wp = weather or WeatherProcess()
    width = len(str(n_countries - 1))
    countries = [f"C{i:0{width}d}" for i in range(n_countries)]
    years = np.arange(start_year, start_year + n_years)
    t = years - years[0]

    mu_T = rng.uniform(*wp.temp_range, n_countries)
    warm = rng.uniform(*wp.warming_range, n_countries)
    tau = rng.uniform(*wp.tau_range, n_countries)
    mu_R = rng.uniform(*wp.rain_range, n_countries)
    rdrift = rng.uniform(*wp.rain_drift_range, n_countries)
    k0 = rng.normal(10.0, 1.0, n_countries)
    kg = rng.uniform(0.0, 0.04, n_countries)
    P = (rng.uniform(size=n_countries) < wp.poor_share).astype(int)
    H = classify_hot(dict(zip(countries, mu_T))).reindex(countries).to_numpy() if n_countries >= 4 \
        else np.zeros(n_countries, dtype=int)

    Tbar = mu_T[:, None] + warm[:, None] * t[None, :]
    Rbar = mu_R[:, None] * (1.0 + rdrift[:, None] * t[None, :] / 10.0)
    rho = wp.rho_fraction * Rbar
    zT = rng.standard_normal((n_countries, n_years))
    zR = rng.standard_normal((n_countries, n_years))
    shocks = rng.normal(0.0, 0.1, (n_countries, n_years))
    ar = np.zeros_like(shocks)
    for j in range(n_years):
        ar[:, j] = (0.8 * ar[:, j - 1] if j else 0.0) + shocks[:, j]
    lnk = k0[:, None] + kg[:, None] * t[None, :] + ar

    return pd.DataFrame({
        "country": np.repeat(countries, n_years),
        "year": np.tile(years, n_countries),
        "lnk": lnk.ravel(),
        "T": (Tbar + tau[:, None] * zT).ravel(),
        "R": (Rbar + rho * zR).ravel(),
        "Tbar": Tbar.ravel(),
        "Rbar": Rbar.ravel(),
        "tau": np.repeat(tau, n_years),
        "rho": rho.ravel(),
        "zT": zT.ravel(),
        "zR": zR.ravel(),
        "P": np.repeat(P, n_years),
        "H": np.repeat(H, n_years),
    })


def draw_inefficiency(sigma_u, rng, dist="exponential"):
    sigma_u = np.asarray(sigma_u, dtype=float)
    if dist == "exponential":
        return rng.exponential(1.0, sigma_u.shape) * sigma_u
    if dist == "halfnormal":
        return np.abs(rng.standard_normal(sigma_u.shape)) * sigma_u
    raise InvalidInput(f"unknown distribution {dist!r}")


def simulate_panel(spec, beta, gamma, sigma_v, n_countries=50, n_years=60, seed=0,
                   weather=None, intercept=5.0, fe_sd=0.5, start_year=1955):
    """Synthetic panel drawn from the frontier model described by ``spec``.

    Parameters
    ----------
    spec : ModelSpec
    beta : dict
        Frontier coefficients by column label (``"lnk"``, ``"T^2"``, ``"trend"`` ...).
        Country effects are drawn from Normal(0, fe_sd**2) around ``intercept``.
    gamma : sequence or dict
        Inefficiency coefficients, constant first (or by label, ``"const"`` included).
    sigma_v : float
    seed : int or numpy Generator

    Returns
    -------
    DataFrame
        Panel columns plus ``u_true``, ``v_true`` and ``sigma_u_true``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    panel = simulate_covariates(n_countries, n_years, rng, weather, start_year)
    panel["lny"] = 0.0
    d = build_design(panel, spec)

    b = np.zeros(d.X.shape[1])
    for j, name in enumerate(d.x_names):
        if name == "const":
            b[j] = intercept
        elif name.startswith("fe["):
            b[j] = rng.normal(0.0, fe_sd)
        elif name in beta:
            b[j] = beta[name]
        else:
            raise MissingVariable(name)
    if isinstance(gamma, dict):
        g = np.array([gamma[name] for name in d.z_names], dtype=float)
    else:
        g = np.asarray(gamma, dtype=float)
        if g.shape != (d.Z.shape[1],):
            raise DimensionError(f"gamma needs {d.Z.shape[1]} entries for {d.z_names}")
    sigma_u = np.exp(d.Z @ g)
    u = draw_inefficiency(sigma_u, rng, spec.distribution)
    v = rng.normal(0.0, sigma_v, d.n)
    panel["lny"] = d.X @ b + v - u
    panel["u_true"] = u
    panel["v_true"] = v
    panel["sigma_u_true"] = sigma_u
    return panel


# --------------------------------------------------------------------------
# derived quantities
# --------------------------------------------------------------------------

def elasticity(coefs, row, var="lnk"):
    """Output elasticity with respect to ``var``: derivative of the frontier in ``var``.

    ``coefs`` maps frontier column labels to coefficients; ``row`` supplies the
    values of every other factor in terms that contain ``var`` (``T``/``Tbar``
    and ``R``/``Rbar`` both accepted).
    """
    values = {_canonical(k): float(v) for k, v in row.items()}
    target = _canonical(var)
    total = 0.0
    for name, c in coefs.items():
        if name == "const" or name.startswith(("fe[", "ineff:", "ln_sigma")) or "trend" in name:
            continue
        term = Term.parse(name)
        p = term.power_of(target)
        if not p:
            continue
        prod = p * float(c)
        for v, power in term.factors:
            k = power - 1 if v == target else power
            if k == 0:
                continue
            if v not in values:
                raise MissingVariable(v)
            x = abs(values[v]) if v in ("zT", "zR") else values[v]
            prod *= x ** k
        total += prod
    return total
