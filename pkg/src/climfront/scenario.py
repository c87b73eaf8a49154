"""Climate-change impact projections through a fitted frontier model.

A scenario warms every country by ``dT`` degrees and scales precipitation by
``1 + dR_pct / 100`` over ``horizon`` years. Two channels are evaluated at the
end of the horizon:

frontier
    the climate normals shift fully, so the frontier moves by the change in
    its climate terms;
inefficiency
    a trending climate makes anomalies measured against a trailing window
    larger on average, which changes the expected inefficiency scale.

Per-country multipliers on output per worker are aggregated to a global
output-weighted average and to a population-weighted equity equivalent
(log utility).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import erfcx, ndtr

from .dataio import DEFAULT_WINDOW
from .errors import DegenerateVariance, EmptyInput, InvalidInput, MissingVariable
from .modelspec import ANOMALIES, _canonical

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# inefficiency columns of the base specification, in the order a bare gamma
# vector is read
BASE_GAMMA_NAMES = ("const", "|zT|", "|zR|", "P*|zT|", "P*|zR|", "H*|zT|", "H*|zR|")


@dataclass(frozen=True)
class ClimateScenario:
    """Warming ``dT`` (degrees C) and precipitation change ``dR_pct`` (percent) over ``horizon`` years."""

    dT: float = 0.0
    dR_pct: float = 0.0
    horizon: float = 100.0

    def __post_init__(self):
        if not (math.isfinite(self.dT) and math.isfinite(self.dR_pct)):
            raise InvalidInput("scenario changes must be finite")
        if not self.horizon > 0:
            raise InvalidInput("horizon must be positive")

    @property
    def is_zero(self):
        return self.dT == 0 and self.dR_pct == 0


@dataclass
class CountryBaseline:
    """Most recent economy and climate of one country.

    ``extras`` holds any other variable a coefficient may need (``lnk``,
    ``polity2``, empirical anomaly means, ...).
    """

    country: str
    y: float
    workers: float
    population: float
    Tbar: float
    Rbar: float
    tau: float
    rho: float
    P: float = 0.0
    H: float = 0.0
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("y", "workers", "population"):
            if not getattr(self, name) > 0:
                raise InvalidInput(f"{self.country}: {name} must be positive")

    def value(self, var):
        if var in ("Tbar", "Rbar", "tau", "rho", "P", "H"):
            return float(getattr(self, var))
        if var in self.extras:
            return float(self.extras[var])
        raise MissingVariable(var)


def baselines_from_frame(df):
    """CountryBaseline list from a table with one row per country; unknown columns go to ``extras``."""
    known = {"country", "year", "y", "workers", "population", "Tbar", "Rbar", "tau", "rho", "P", "H"}
    missing = {"country", "y", "workers", "population", "Tbar", "Rbar", "tau", "rho"} - set(df.columns)
    if missing:
        raise MissingVariable(sorted(missing)[0])
    out = []
    for rec in df.to_dict("records"):
        extras = {k: v for k, v in rec.items() if k not in known and pd.notna(v)}
        out.append(CountryBaseline(
            country=str(rec["country"]), y=float(rec["y"]), workers=float(rec["workers"]),
            population=float(rec["population"]), Tbar=float(rec["Tbar"]), Rbar=float(rec["Rbar"]),
            tau=float(rec["tau"]), rho=float(rec["rho"]),
            P=float(rec.get("P", 0.0)), H=float(rec.get("H", 0.0)), extras=extras))
    return out


def baseline_frame(panel, econ):
    """Most recent panel year of every country joined with its workforce and population.

    Parameters
    ----------
    panel : DataFrame
        Assembled panel (``lny``, ``lnk``, normals, ``P``, ``H``).
    econ : DataFrame
        Economic table with ``country, year, labor, population``.
    """
    need = {"country", "year", "labor", "population"}
    if not need <= set(econ.columns):
        raise MissingVariable(sorted(need - set(econ.columns))[0])
    last = panel.sort_values(["country", "year"]).groupby("country", sort=True).tail(1)
    df = last.merge(econ[["country", "year", "labor", "population"]], on=["country", "year"], how="inner")
    out = pd.DataFrame({
        "country": df["country"], "year": df["year"], "y": np.exp(df["lny"]),
        "workers": df["labor"], "population": df["population"],
        "Tbar": df["Tbar"], "Rbar": df["Rbar"], "tau": df["tau"], "rho": df["rho"],
        "P": df["P"], "H": df["H"], "lnk": df["lnk"],
    })
    return out.reset_index(drop=True)


def expected_abs_shift(delta):
    """``E|Z + delta|`` for standard normal ``Z``: ``delta (2 Phi(delta) - 1) + 2 phi(delta)``."""
    # evaluated at |delta|: exactly symmetric and free of cancellation in the tail
    d = np.abs(np.asarray(delta, dtype=float))
    out = d * (1.0 - 2.0 * ndtr(-d)) + 2.0 * np.exp(-0.5 * d * d) / math.sqrt(2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def expected_transformed(delta, kind):
    """Mean of a transformed anomaly ``Z + delta``.

    ``kind`` is one of ``abs``, ``square``, ``identity``, ``pos`` (positive
    part) or ``neg`` (negative part).
    """
    d = float(delta)
    phi = math.exp(-0.5 * d * d) / math.sqrt(2.0 * math.pi)
    if kind == "abs":
        return expected_abs_shift(d)
    if kind == "square":
        return 1.0 + d * d
    if kind == "identity":
        return d
    if kind == "pos":
        return d * ndtr(d) + phi
    if kind == "neg":
        return -d * ndtr(-d) + phi
    raise InvalidInput(f"unknown anomaly transform {kind!r}")


def anomaly_shifts(baseline, scenario, window=DEFAULT_WINDOW):
    """Mean shift of the temperature and precipitation anomalies, in standard deviations.

    Over a trailing window of ``window`` years a linear trend leaves the current
    year ``window / 2`` years of trend above the normal.
    """
    if not (baseline.tau > 0 and baseline.rho > 0):
        raise DegenerateVariance(f"{baseline.country}: climate standard deviations must be positive")
    half = 0.5 * window
    dT = half * (scenario.dT / scenario.horizon) / baseline.tau
    dR = half * (baseline.Rbar * scenario.dR_pct / 100.0 / scenario.horizon) / baseline.rho
    # last year's anomaly carries the same end-of-horizon shift
    return {"zT": dT, "zR": dR, "L.zT": dT, "L.zR": dR}


def _factor(part):
    """``(variable, power, anomaly kind or None)`` for one ``*``-separated piece of a label."""
    m = re.fullmatch(r"\|([\w.]+)\|", part)
    if m and _canonical(m.group(1)) in ANOMALIES:
        return _canonical(m.group(1)), 1, "abs"
    m = re.fullmatch(r"([\w.]+)([+-])", part)
    if m and _canonical(m.group(1)) in ANOMALIES:
        return _canonical(m.group(1)), 1, "pos" if m.group(2) == "+" else "neg"
    m = re.fullmatch(r"([\w.]+)(?:\^(\d+))?", part)
    if not m:
        raise InvalidInput(f"cannot read coefficient label piece {part!r}")
    var, power = _canonical(m.group(1)), int(m.group(2) or 1)
    if var in ANOMALIES:
        return var, 1, "square" if power == 2 else "identity"
    return var, power, None


def _is_structural(name):
    return (name == "const" or name.startswith(("fe[", "ln_sigma", "D.")) or "trend" in name)


def _evaluate(name, values, anomaly_means):
    prod = 1.0
    for part in name.split("*"):
        var, power, kind = _factor(part)
        if kind is not None:
            prod *= anomaly_means[(var, kind)]
        else:
            if var not in values:
                raise MissingVariable(var)
            prod *= values[var] ** power
    return prod


def _climate_terms(coefs):
    """Frontier coefficients whose label involves a climate normal."""
    out = {}
    for name, c in coefs.items():
        if _is_structural(name) or name.startswith("ineff:"):
            continue
        if any(_factor(p)[0] in ("Tbar", "Rbar") for p in name.split("*")):
            out[name] = float(c)
    return out


def _values(baseline, names):
    wanted = {_factor(p)[0] for n in names for p in n.split("*")} - set(ANOMALIES)
    return {v: baseline.value(v) for v in wanted}


def frontier_log_change(baseline, coefs, scenario):
    """Change in the log frontier when the normals move to the end-of-horizon climate."""
    terms = _climate_terms(coefs)
    if scenario.is_zero or not terms:
        return 0.0
    base = _values(baseline, terms)
    new = dict(base, Tbar=base.get("Tbar", baseline.Tbar) + scenario.dT,
               Rbar=base.get("Rbar", baseline.Rbar) * (1.0 + scenario.dR_pct / 100.0))
    zero = {(a, k): expected_transformed(0.0, k) for a in ANOMALIES
            for k in ("abs", "square", "identity", "pos", "neg")}
    return sum(c * (_evaluate(n, new, zero) - _evaluate(n, base, zero)) for n, c in terms.items())


def frontier_impact(baseline, coefs, scenario):
    """Multiplier on output per worker from the frontier channel.

    Parameters
    ----------
    baseline : CountryBaseline
    coefs : mapping
        Frontier coefficients by column label (``"T"``, ``"T^2"``, ``"P*T*R"``,
        ...). Non-climate entries are ignored.
    scenario : ClimateScenario

    Returns
    -------
    float
    """
    return math.exp(frontier_log_change(baseline, coefs, scenario))


def _gamma_mapping(gamma):
    if isinstance(gamma, dict) or hasattr(gamma, "items"):
        g = {}
        for k, v in gamma.items():
            k = k[len("ineff:"):] if k.startswith("ineff:") else k
            g[k] = float(v)
    else:
        vals = [float(v) for v in gamma]
        if len(vals) != len(BASE_GAMMA_NAMES):
            raise InvalidInput(f"a bare gamma vector needs {len(BASE_GAMMA_NAMES)} entries")
        g = dict(zip(BASE_GAMMA_NAMES, vals))
    if "const" not in g:
        raise MissingVariable("const")
    return g


def sigma_u(baseline, gamma, shifts, empirical=False):
    """Inefficiency scale ``exp(const + sum gamma_k E[term_k])`` at the given anomaly shifts."""
    g = _gamma_mapping(gamma)
    means = {}
    for a in ANOMALIES:
        for k in ("abs", "square", "identity", "pos", "neg"):
            m = expected_transformed(shifts[a], k)
            if empirical:
                key = f"mean_{k}_{a}"
                if key not in baseline.extras:
                    raise MissingVariable(key)
                m += float(baseline.extras[key]) - expected_transformed(0.0, k)
            means[(a, k)] = m
    names = [n for n in g if n != "const"]
    values = _values(baseline, names)
    index = g["const"] + sum(g[n] * _evaluate(n, values, means) for n in names)
    return math.exp(index)


def expected_efficiency(su, dist="exponential"):
    """``E[exp(-u)]`` for inefficiency with scale ``su``."""
    if dist == "exponential":
        return 1.0 / (1.0 + su)
    if dist == "halfnormal":
        # 2 exp(s^2/2) Phi(-s) written through erfcx to avoid overflow
        return erfcx(su / math.sqrt(2.0))
    raise InvalidInput(f"unknown distribution {dist!r}")


def mean_inefficiency(su, dist="exponential"):
    if dist == "exponential":
        return su
    if dist == "halfnormal":
        return su * SQRT_2_OVER_PI
    raise InvalidInput(f"unknown distribution {dist!r}")


def inefficiency_impact(baseline, gamma, scenario, window=DEFAULT_WINDOW, dist="exponential",
                        channel="log", empirical_baseline=False):
    """Multiplier on output per worker from the inefficiency channel.

    Parameters
    ----------
    baseline : CountryBaseline
    gamma : mapping or sequence
        Inefficiency coefficients by label including ``"const"``; a bare
        sequence is read in the order of ``BASE_GAMMA_NAMES``.
    scenario : ClimateScenario
    window : int
        Length of the trailing window that defines the normals.
    dist : {"exponential", "halfnormal"}
    channel : {"log", "level"}
        ``"log"`` shifts log output by minus the change in ``E[u]``;
        ``"level"`` uses the ratio of ``E[exp(-u)]``.
    empirical_baseline : bool
        Start from the country's observed mean transformed anomalies
        (``extras["mean_abs_zT"]`` etc.) instead of standard-normal values.
    """
    shifts = anomaly_shifts(baseline, scenario, window)
    if scenario.is_zero:
        return 1.0
    base = sigma_u(baseline, gamma, dict.fromkeys(shifts, 0.0), empirical_baseline)
    new = sigma_u(baseline, gamma, shifts, empirical_baseline)
    if channel == "log":
        return math.exp(mean_inefficiency(base, dist) - mean_inefficiency(new, dist))
    if channel == "level":
        return expected_efficiency(new, dist) / expected_efficiency(base, dist)
    raise InvalidInput(f"unknown channel {channel!r}")


def aggregate_global(multipliers, baselines, mode="average"):
    """Global multiplier.

    ``average`` weights countries by output (``y * workers``); ``equity`` is the
    income equivalent under log utility with population weights.
    """
    m = np.asarray(multipliers, dtype=float)
    if m.size == 0 or len(baselines) == 0:
        raise EmptyInput("no countries to aggregate")
    if m.size != len(baselines):
        raise InvalidInput("one multiplier per baseline required")
    if np.any(m <= 0):
        raise InvalidInput("multipliers must be positive")
    if mode == "average":
        w = np.array([b.y * b.workers for b in baselines])
        return float(np.sum(w * m) / np.sum(w))
    if mode == "equity":
        w = np.array([b.population for b in baselines])
        return float(np.exp(np.sum(w * np.log(m)) / np.sum(w)))
    raise InvalidInput(f"unknown aggregation mode {mode!r}")


@dataclass
class ImpactResult:
    """Per-country multipliers (``frontier``, ``inefficiency``, ``combined``) and global aggregates."""

    scenario: ClimateScenario
    countries: pd.DataFrame
    aggregates: dict

    def aggregate(self, channel, mode):
        return self.aggregates[(channel, mode)]


def _split_coefs(coefs):
    if hasattr(coefs, "coefs") and callable(coefs.coefs):
        coefs = coefs.coefs()
    frontier = {k: v for k, v in coefs.items() if not k.startswith("ineff:")}
    gamma = {k[len("ineff:"):]: v for k, v in coefs.items() if k.startswith("ineff:")}
    return frontier, gamma


def project(baselines, coefs, scenario, modes=("average", "equity"), **options):
    """Impacts of one scenario on every country.

    ``coefs`` is a FitResult or a flat mapping in which inefficiency entries
    carry the ``ineff:`` prefix. ``options`` go to :func:`inefficiency_impact`.
    """
    if not baselines:
        raise EmptyInput("no baselines")
    frontier, gamma = _split_coefs(coefs)
    rows = []
    for b in baselines:
        f = frontier_impact(b, frontier, scenario)
        i = inefficiency_impact(b, gamma, scenario, **options)
        rows.append((b.country, f, i, f * i))
    table = pd.DataFrame(rows, columns=["country", "frontier", "inefficiency", "combined"])
    agg = {(ch, mode): aggregate_global(table[ch].to_numpy(), baselines, mode)
           for ch in ("frontier", "inefficiency", "combined") for mode in modes}
    return ImpactResult(scenario=scenario, countries=table, aggregates=agg)


def default_grid(horizon=100.0):
    """Warming of 1..6 degrees with unchanged rain, then rain changes of -30..30 percent."""
    grid = [ClimateScenario(float(d), 0.0, horizon) for d in range(1, 7)]
    grid += [ClimateScenario(0.0, float(r), horizon) for r in (-30, -20, -10, 10, 20, 30)]
    return grid


CURVE_COLUMNS = ["dT", "dR_pct", "horizon", "channel", "mode", "value"]
SCATTER_COLUMNS = ["country", "population", "P", "H", "Tbar", "tau", "Rbar", "rho",
                   "temp_frontier", "temp_inefficiency", "precip_frontier", "precip_inefficiency"]


def emit_projection(baselines, coefs, grid, scatter_scenario=None, modes=("average", "equity"),
                    **options):
    """Curve and scatter tables.

    Parameters
    ----------
    baselines : list of CountryBaseline
    coefs : FitResult or mapping
    grid : sequence of ClimateScenario
        One curve row per scenario, channel and aggregation mode.
    scatter_scenario : ClimateScenario, optional
        Per-country impacts are split into a temperature-only and a
        precipitation-only scenario. Defaults to the last scenario in ``grid``.

    Returns
    -------
    curves, scatter : DataFrame
    """
    grid = list(grid)
    if not grid:
        raise EmptyInput("scenario grid is empty")
    rows = []
    for s in grid:
        res = project(baselines, coefs, s, modes, **options)
        for ch in ("frontier", "inefficiency"):
            for mode in modes:
                rows.append((s.dT, s.dR_pct, s.horizon, ch, mode, res.aggregate(ch, mode)))
    curves = pd.DataFrame(rows, columns=CURVE_COLUMNS)

    s = scatter_scenario if scatter_scenario is not None else grid[-1]
    temp = project(baselines, coefs, ClimateScenario(s.dT, 0.0, s.horizon), modes, **options)
    rain = project(baselines, coefs, ClimateScenario(0.0, s.dR_pct, s.horizon), modes, **options)
    scatter = pd.DataFrame({
        "country": [b.country for b in baselines],
        "population": [b.population for b in baselines],
        "P": [b.P for b in baselines], "H": [b.H for b in baselines],
        "Tbar": [b.Tbar for b in baselines], "tau": [b.tau for b in baselines],
        "Rbar": [b.Rbar for b in baselines], "rho": [b.rho for b in baselines],
        "temp_frontier": temp.countries["frontier"].to_numpy(),
        "temp_inefficiency": temp.countries["inefficiency"].to_numpy(),
        "precip_frontier": rain.countries["frontier"].to_numpy(),
        "precip_inefficiency": rain.countries["inefficiency"].to_numpy(),
    })
    return curves, scatter[SCATTER_COLUMNS]
