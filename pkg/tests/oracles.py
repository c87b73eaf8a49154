"""Independent reference computations used by the tests.

Nothing here calls into the package: densities come from numerical
convolution, conditional means from truncated-normal integrals and
expectations from plain Monte Carlo.
"""
import math

import numpy as np
from scipy import integrate, stats


def _u_density(u, sigma_u, dist):
    if dist == "exponential":
        return np.exp(-u / sigma_u) / sigma_u
    return 2.0 * stats.norm.pdf(u / sigma_u) / sigma_u


def _u_upper(sigma_v, sigma_u, eps):
    # beyond this point both factors are negligible
    return abs(eps) + 40.0 * (sigma_u + sigma_v)


def convolution_density(eps, sigma_v, sigma_u, dist="exponential"):
    """``f(eps) = int_0^inf f_u(u) phi((eps + u) / sv) / sv du`` by adaptive quadrature."""
    def integrand(u):
        return _u_density(u, sigma_u, dist) * stats.norm.pdf((eps + u) / sigma_v) / sigma_v
    # split at the peak of the normal factor so quad sees it
    peak = max(0.0, -eps)
    hi = _u_upper(sigma_v, sigma_u, eps)
    pts = sorted({0.0, peak, min(hi, peak + 5 * sigma_v), hi})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            total += integrate.quad(integrand, a, b, epsabs=0, epsrel=1e-13, limit=500)[0]
    return total


def log_convolution_density(eps, sigma_v, sigma_u, dist="exponential"):
    return math.log(convolution_density(eps, sigma_v, sigma_u, dist))


def density_mass(density, sigma_v, sigma_u):
    """Integral over the real line of ``density(eps)``, a vectorised pdf of the composed error."""
    lo = -60.0 * (sigma_u + sigma_v)
    hi = 12.0 * sigma_v
    pts = sorted({lo, -10 * sigma_u, -sigma_u, 0.0, hi})
    pts = [p for p in pts if lo <= p <= hi]
    return sum(integrate.quad(density, a, b, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
               for a, b in zip(pts[:-1], pts[1:]))


def conditional_mean_u(eps, sigma_v, sigma_u, dist="exponential"):
    """``E[u | eps]`` as a ratio of two quadratures over the joint density of ``(u, eps)``."""
    def joint(u):
        return _u_density(u, sigma_u, dist) * stats.norm.pdf((eps + u) / sigma_v)
    peak = max(0.0, -eps)
    hi = _u_upper(sigma_v, sigma_u, eps)
    pts = sorted({0.0, peak, min(hi, peak + 5 * sigma_v), hi})
    num = den = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            num += integrate.quad(lambda u: u * joint(u), a, b, epsabs=0, epsrel=1e-13, limit=500)[0]
            den += integrate.quad(joint, a, b, epsabs=0, epsrel=1e-13, limit=500)[0]
    return num / den


def truncated_normal_mean(mu, sigma):
    """Mean of Normal(mu, sigma^2) truncated to [0, inf), from scipy's truncnorm."""
    return float(stats.truncnorm.mean((0.0 - mu) / sigma, np.inf, loc=mu, scale=sigma))


def central_difference(f, x, step=1e-5):
    """Gradient of scalar ``f`` at ``x`` with absolute step ``step``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += step
        xm[j] -= step
        g[j] = (f(xp) - f(xm)) / (2 * step)
    return g


def mc_abs_shift(delta, n=10_000_000, seed=12345):
    """Monte Carlo ``E|Z + delta|`` with its standard error."""
    rng = np.random.default_rng(seed)
    total = total2 = 0.0
    done = 0
    while done < n:
        m = min(1_000_000, n - done)
        x = np.abs(rng.standard_normal(m) + delta)
        total += x.sum()
        total2 += (x * x).sum()
        done += m
    mean = total / n
    return mean, math.sqrt((total2 / n - mean * mean) / n)


def ols(y, X):
    """Least squares coefficients and classical standard errors via the normal equations."""
    XtX = X.T @ X
    b = np.linalg.solve(XtX, X.T @ y)
    e = y - X @ b
    s2 = e @ e / (len(y) - X.shape[1])
    return b, np.sqrt(np.diag(s2 * np.linalg.inv(XtX)))


def sample_sd_1_to_n(n):
    """Closed-form sample standard deviation of 1, 2, ..., n."""
    return math.sqrt(n * (n + 1) / 12.0)
