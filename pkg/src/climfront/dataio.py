"""Build the country-year estimation panel from gridded weather and economic data.

Pipeline::

    grid cells --(population-weighted mean)--> country-month
               --(mean of 12 months)--------> country-year T, R
               --(trailing W-year window)----> normals Tbar, Rbar, tau, rho
               --(standardize)---------------> anomalies zT, zR
    + economic rows (output, capital, labor) + P/H dummies  -> panel

Precipitation stays in cm/month throughout.
"""
from __future__ import annotations

import math

import numpy as np
import pandas as pd

from .errors import (
    DataError,
    DegenerateVariance,
    DuplicateKey,
    EmptyPanel,
    IncompleteYear,
    InsufficientHistory,
    MissingCoverage,
    MissingIncome,
)

GRID_COLUMNS = ["lat", "lon", "year", "month", "temperature_c", "precipitation_cm"]
WEIGHT_COLUMNS = ["lat", "lon", "country", "weight"]
ECON_COLUMNS = ["country", "year", "output", "capital", "labor"]
WEATHER_COLUMNS = ["T", "R", "Tbar", "Rbar", "tau", "rho", "zT", "zR"]
PANEL_COLUMNS = ["country", "year", "lny", "lnk", *WEATHER_COLUMNS, "P", "H"]

CELL_SIZE = 0.5
DEFAULT_WINDOW = 30

# Countries smaller than one grid cell take the weather of the cell they sit in.
FALLBACK_CELLS = {"SGP": (1.25, 103.75)}


def cell_of(lat, lon, size=CELL_SIZE):
    """Centre of the grid cell containing ``(lat, lon)``."""
    clat = math.floor(lat / size) * size + size / 2
    clon = math.floor(lon / size) * size + size / 2
    return clat, clon


# --------------------------------------------------------------------------
# readers / writers
# --------------------------------------------------------------------------

def _require(df, columns, what):
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise DataError(f"{what} is missing columns: {', '.join(missing)}")


def read_grid(path):
    df = pd.read_csv(path)
    _require(df, GRID_COLUMNS, "weather grid file")
    validate_grid(df)
    return df


def validate_grid(df):
    if not df["lat"].between(-90, 90).all():
        raise DataError("grid latitude outside [-90, 90]")
    if not ((df["lon"] >= -180) & (df["lon"] < 180)).all():
        raise DataError("grid longitude outside [-180, 180)")
    if not df["month"].isin(range(1, 13)).all():
        raise DataError("grid month outside 1..12")
    if (df["precipitation_cm"] < 0).any():
        raise DataError("negative precipitation in grid")


def read_weights(path):
    df = pd.read_csv(path)
    _require(df, WEIGHT_COLUMNS, "weights file")
    if (df["weight"] < 0).any():
        raise DataError("negative population weight")
    if df.duplicated(["lat", "lon"]).any():
        raise DataError("a grid cell is assigned to more than one country")
    return df


def read_econ(path):
    df = pd.read_csv(path)
    _require(df, ECON_COLUMNS, "economic file")
    return df


def read_high_income(path):
    with open(path) as fh:
        return {line.strip() for line in fh if line.strip() and not line.startswith("#")}


def write_panel(panel, path):
    extras = [c for c in panel.columns if c not in PANEL_COLUMNS]
    panel[PANEL_COLUMNS + extras].to_csv(path, index=False, float_format="%.10g")


def read_panel(path):
    df = pd.read_csv(path)
    _require(df, ["country", "year"], "panel file")
    return df


# --------------------------------------------------------------------------
# spatial and temporal aggregation
# --------------------------------------------------------------------------

def aggregate_cells(observations, weights, country=None, fallback_cell=None):
    """Population-weighted mean temperature and precipitation for one country-month.

    Parameters
    ----------
    observations : DataFrame
        Grid rows (``lat, lon, temperature_c, precipitation_cm``) for a single
        year and month.
    weights : DataFrame
        ``lat, lon, weight`` rows of the country's cells (a ``country`` column,
        if present, is filtered on ``country``).
    fallback_cell : (lat, lon), optional
        Cell to use when the country owns no cell with positive weight.

    Returns
    -------
    (T, R) : tuple of float
    """
    w = weights
    if country is not None and "country" in w.columns:
        w = w[w["country"] == country]
    w = w[w["weight"] > 0]
    merged = observations.merge(w[["lat", "lon", "weight"]], on=["lat", "lon"])
    if merged.empty:
        if fallback_cell is None and country in FALLBACK_CELLS:
            fallback_cell = FALLBACK_CELLS[country]
        if fallback_cell is None:
            raise MissingCoverage(country)
        lat, lon = fallback_cell
        cell = observations[np.isclose(observations["lat"], lat) & np.isclose(observations["lon"], lon)]
        if cell.empty:
            raise MissingCoverage(country)
        return float(cell["temperature_c"].iloc[0]), float(cell["precipitation_cm"].iloc[0])
    wt = merged["weight"].to_numpy(float)
    T = np.dot(wt, merged["temperature_c"].to_numpy(float)) / wt.sum()
    R = np.dot(wt, merged["precipitation_cm"].to_numpy(float)) / wt.sum()
    return float(T), float(R)


def country_month_weather(grid, weights, fallback_cells=None):
    """Vectorised :func:`aggregate_cells` over every country, year and month.

    Returns a frame ``country, year, month, T, R``.
    """
    fallback_cells = FALLBACK_CELLS if fallback_cells is None else fallback_cells
    w = weights[weights["weight"] > 0]
    m = grid.merge(w[["lat", "lon", "country", "weight"]], on=["lat", "lon"])
    m = m.assign(wT=m["weight"] * m["temperature_c"], wR=m["weight"] * m["precipitation_cm"])
    g = m.groupby(["country", "year", "month"], sort=True)[["weight", "wT", "wR"]].sum()
    out = pd.DataFrame({"T": g["wT"] / g["weight"], "R": g["wR"] / g["weight"]}).reset_index()

    covered = set(out["country"])
    extra = []
    for country in sorted(set(weights["country"]) - covered):
        if country not in fallback_cells:
            raise MissingCoverage(country)
        lat, lon = fallback_cells[country]
        cell = grid[np.isclose(grid["lat"], lat) & np.isclose(grid["lon"], lon)]
        if cell.empty:
            raise MissingCoverage(country)
        extra.append(pd.DataFrame({
            "country": country,
            "year": cell["year"].to_numpy(),
            "month": cell["month"].to_numpy(),
            "T": cell["temperature_c"].to_numpy(float),
            "R": cell["precipitation_cm"].to_numpy(float),
        }))
    if extra:
        out = pd.concat([out, *extra], ignore_index=True)
    return out.sort_values(["country", "year", "month"], ignore_index=True)


def annualize(monthly):
    """Annual value as the plain mean of exactly 12 monthly values."""
    values = np.asarray(monthly, dtype=float)
    if values.shape != (12,):
        raise IncompleteYear(f"expected 12 monthly values, got {values.size}")
    return float(values.mean())


def annual_weather(monthly):
    """Country-year ``T``, ``R`` from a country-month frame; incomplete years raise."""
    counts = monthly.groupby(["country", "year"])["month"].nunique()
    bad = counts[counts != 12]
    if len(bad):
        country, year = bad.index[0]
        raise IncompleteYear(f"{country} {year}: {bad.iloc[0]} of 12 months present")
    return monthly.groupby(["country", "year"], sort=True)[["T", "R"]].mean().reset_index()


def rolling_normals(series, window=DEFAULT_WINDOW, years=None):
    """Trailing mean and sample standard deviation over the ``window`` years before each year.

    Parameters
    ----------
    series : pandas.Series or Mapping
        Yearly values for one country, indexed by year.
    window : int
        Number of preceding years. Year ``t`` itself is excluded.
    years : iterable of int, optional
        Target years. Defaults to every year of ``series`` (and the year after
        the last one) that has a complete window.

    Returns
    -------
    DataFrame indexed by year with columns ``mean`` and ``sd``.
    """
    s = pd.Series(series, dtype=float).sort_index()
    if s.index.has_duplicates:
        raise DuplicateKey("duplicate years in series")
    present = set(int(y) for y in s.index)
    first_valid = int(s.index.min()) + window if len(s) else None

    def complete(t):
        return all((t - k) in present for k in range(1, window + 1))

    if years is None:
        candidates = list(s.index.astype(int)) + ([int(s.index.max()) + 1] if len(s) else [])
        years = [t for t in candidates if complete(t)]
        if not years:
            raise InsufficientHistory(
                f"series of {len(s)} years is shorter than the {window}-year window",
                first_valid_year=first_valid,
            )
    rows = []
    for t in years:
        t = int(t)
        if not complete(t):
            raise InsufficientHistory(
                f"year {t} lacks a complete {window}-year history", first_valid_year=first_valid
            )
        vals = s.loc[t - window:t - 1].to_numpy()
        sd = float(np.std(vals, ddof=1)) if window > 1 else 0.0
        rows.append((t, float(vals.mean()), sd))
    return pd.DataFrame(rows, columns=["year", "mean", "sd"]).set_index("year")


def standardize(value, mean, sd):
    if not sd > 0:
        raise DegenerateVariance(f"standard deviation {sd!r} is not positive")
    return (value - mean) / sd


def weather_panel(annual, window=DEFAULT_WINDOW):
    """Normals and standardized anomalies for every country-year with a full window.

    Country-years without enough history are left out rather than raising, so the
    first ``window`` years of every country simply fall outside the panel.
    """
    out = []
    for country, g in annual.groupby("country", sort=True):
        g = g.set_index("year").sort_index()
        targets = [int(t) for t in g.index if all((t - k) in g.index for k in range(1, window + 1))]
        if not targets:
            continue
        nT = rolling_normals(g["T"], window, targets)
        nR = rolling_normals(g["R"], window, targets)
        frame = pd.DataFrame({
            "country": country,
            "year": targets,
            "T": g.loc[targets, "T"].to_numpy(),
            "R": g.loc[targets, "R"].to_numpy(),
            "Tbar": nT["mean"].to_numpy(),
            "Rbar": nR["mean"].to_numpy(),
            "tau": nT["sd"].to_numpy(),
            "rho": nR["sd"].to_numpy(),
        })
        for col, sd in (("tau", "tau"), ("rho", "rho")):
            bad = frame[~(frame[sd] > 0)]
            if len(bad):
                raise DegenerateVariance(
                    f"{country} {int(bad['year'].iloc[0])}: constant climate history ({col} = 0)"
                )
        frame["zT"] = (frame["T"] - frame["Tbar"]) / frame["tau"]
        frame["zR"] = (frame["R"] - frame["Rbar"]) / frame["rho"]
        out.append(frame)
    if not out:
        return pd.DataFrame(columns=["country", "year", *WEATHER_COLUMNS])
    return pd.concat(out, ignore_index=True)


# --------------------------------------------------------------------------
# classification dummies
# --------------------------------------------------------------------------

def nearest_rank_percentile(values, p):
    v = np.sort(np.asarray(list(values), dtype=float))
    if v.size == 0:
        raise DataError("percentile of an empty set")
    rank = max(1, math.ceil(p / 100.0 * v.size))
    return float(v[rank - 1])


def classify_poor(countries, method="worldbank-list", high_income=None, income1990=None,
                  percentile=25):
    """Time-invariant poverty dummy per country.

    ``worldbank-list``: poor unless listed in ``high_income``.
    ``percentile25-1990``: poor if 1990 income is strictly below the nearest-rank
    ``percentile`` of the cross-country 1990 income distribution.
    """
    countries = sorted(set(countries))
    if method == "worldbank-list":
        if high_income is None:
            raise DataError("worldbank-list method needs a high-income country list")
        rich = set(high_income)
        return pd.Series({c: int(c not in rich) for c in countries}, name="P", dtype=int)
    if method in ("percentile25-1990", "percentile"):
        income1990 = dict(income1990 or {})
        missing = [c for c in countries if c not in income1990 or not np.isfinite(income1990[c])]
        if missing:
            raise MissingIncome(f"no 1990 income for: {', '.join(missing)}")
        cut = nearest_rank_percentile([income1990[c] for c in countries], percentile)
        return pd.Series({c: int(income1990[c] < cut) for c in countries}, name="P", dtype=int)
    raise DataError(f"unknown poverty method {method!r}")


def classify_hot(mean_temperature, percentile=75):
    """Heat dummy: 1 iff a country's mean temperature is strictly above the nearest-rank 75th percentile."""
    temps = pd.Series(mean_temperature, dtype=float).sort_index()
    if len(temps) < 4:
        raise DataError("heat classification needs at least 4 countries")
    cut = nearest_rank_percentile(temps.to_numpy(), percentile)
    return (temps > cut).astype(int).rename("H")


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------

def _check_unique(df, what):
    dup = df.duplicated(["country", "year"])
    if dup.any():
        row = df.loc[dup].iloc[0]
        raise DuplicateKey(f"duplicate (country, year) in {what}: ({row['country']}, {row['year']})")


def assemble_panel(econ, weather, dummies):
    """Inner-join economic rows, weather rows and per-country dummies.

    ``econ`` holds either ``output, capital, labor`` or ready-made ``lny, lnk``;
    any further columns are carried along as extra covariates. ``dummies`` is a
    frame indexed by country (or with a ``country`` column).

    Returns
    -------
    panel : DataFrame
        Sorted by country then year.
    dropped : int
        Number of economic rows lost to the join or to missing values.
    """
    _check_unique(econ, "economic data")
    _check_unique(weather, "weather data")
    econ = econ.copy()
    if "lny" not in econ.columns:
        _require(econ, ECON_COLUMNS, "economic data")
        bad = econ[(econ["output"] <= 0) | (econ["capital"] <= 0) | (econ["labor"] <= 0)]
        if len(bad):
            raise DataError(f"non-positive output, capital or labor for {bad['country'].iloc[0]}")
        econ["lny"] = np.log(econ["output"] / econ["labor"])
        econ["lnk"] = np.log(econ["capital"] / econ["labor"])
        econ = econ.drop(columns=["output", "capital", "labor"])
    extras = [c for c in econ.columns if c not in ("country", "year", "lny", "lnk")
              and c not in WEATHER_COLUMNS and c not in ("P", "H")]

    d = dummies.copy()
    if "country" not in d.columns:
        d = d.rename_axis("country").reset_index()
    dummy_cols = [c for c in d.columns if c != "country"]

    w = weather[["country", "year", *WEATHER_COLUMNS]]
    base = econ[["country", "year", "lny", "lnk", *extras]]
    panel = base.merge(w, on=["country", "year"], how="left").merge(d, on="country", how="left")
    needed = ["lny", "lnk", *WEATHER_COLUMNS, *dummy_cols]
    complete = panel[needed].notna().all(axis=1) & np.isfinite(panel[["lny", "lnk"]]).all(axis=1)
    dropped = int((~complete).sum())
    panel = panel.loc[complete]
    for c in dummy_cols:
        panel[c] = panel[c].astype(int)
    order = ["country", "year", "lny", "lnk", *WEATHER_COLUMNS, *dummy_cols, *extras]
    panel = panel[order].sort_values(["country", "year"], ignore_index=True)
    panel["year"] = panel["year"].astype(int)
    return panel, dropped


def build_panel(grid, weights, econ, high_income=None, window=DEFAULT_WINDOW,
                fallback_cells=None, poor_method="worldbank-list"):
    """Full ingestion: grid + weights + econ -> panel.

    If ``econ`` has a ``population`` column, the alternative poverty dummy
    ``P25`` (below the 25th percentile of 1990 output per head) is added too.
    """
    monthly = country_month_weather(grid, weights, fallback_cells)
    annual = annual_weather(monthly)
    weather = weather_panel(annual, window)

    econ = econ.copy()
    income1990 = None
    if "population" in econ.columns:
        e90 = econ[econ["year"] == 1990]
        income1990 = dict(zip(e90["country"], e90["output"] / e90["population"]))
        econ = econ.drop(columns=["population"])

    keys = econ[["country", "year"]].merge(weather[["country", "year", "T"]], on=["country", "year"])
    countries = sorted(set(keys["country"]))
    if not countries:
        raise EmptyPanel("no country-year has both economic and weather data")
    dummies = pd.DataFrame(index=pd.Index(countries, name="country"))
    if poor_method == "worldbank-list":
        dummies["P"] = classify_poor(countries, "worldbank-list", high_income=high_income or ())
    else:
        dummies["P"] = classify_poor(countries, poor_method, income1990=income1990)
    dummies["H"] = classify_hot(keys.groupby("country")["T"].mean())
    have = [c for c in countries if c in (income1990 or {})]
    if have and poor_method == "worldbank-list":
        p25 = classify_poor(have, "percentile25-1990", income1990=income1990)
        dummies["P25"] = p25.reindex(countries)
    return assemble_panel(econ, weather, dummies)


def describe(panel, variables=None):
    """Mean, sample sd, min, max and count per variable.

    Anomalies are summarised in absolute value (``|zT|``, ``|zR|``). With a
    single observation the sd is NaN and ``sd_defined`` is False.
    """
    if panel is None or len(panel) == 0:
        raise EmptyPanel("cannot describe an empty panel")
    cols = {}
    default = ["lny", "lnk", "Tbar", "Rbar", "|zT|", "|zR|", "P", "H"]
    for name in variables or default:
        if name in ("|zT|", "|zR|"):
            if name[1:-1] in panel.columns:
                cols[name] = panel[name[1:-1]].abs()
        elif name in panel.columns:
            cols[name] = panel[name]
    if variables is None:
        for c in panel.columns:
            if c not in PANEL_COLUMNS and c not in cols and pd.api.types.is_numeric_dtype(panel[c]):
                cols[c] = panel[c]
    rows = []
    for name, s in cols.items():
        s = pd.to_numeric(s, errors="coerce").dropna()
        n = int(s.size)
        rows.append({
            "variable": name,
            "mean": float(s.mean()) if n else np.nan,
            "sd": float(s.std(ddof=1)) if n > 1 else np.nan,
            "min": float(s.min()) if n else np.nan,
            "max": float(s.max()) if n else np.nan,
            "n": n,
            "sd_defined": n > 1,
        })
    return pd.DataFrame(rows).set_index("variable")

