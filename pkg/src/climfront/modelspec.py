"""Declarative model variants and their compilation into design matrices.

A model is a list of frontier terms and a list of inefficiency terms. Each term
is a product of powers of panel variables, e.g. ``T^2`` or ``P*T*R`` or
``H*|zT|``. Weather anomalies (``zT``, ``zR``) pass through the model's anomaly
transform before any product is formed.

Variable names
--------------
``lnk``           log capital per worker (``k`` accepted)
``Tbar``, ``Rbar`` climate normals (written ``T`` and ``R`` in term strings)
``P``, ``P25``, ``H`` country dummies
``zT``, ``zR``    standardized anomalies (``|zT|`` etc. accepted)
``L.zT``, ``L.zR`` one-year lags of the anomalies
``trend``         year minus the sample midpoint year
anything else     taken verbatim from the panel (e.g. ``polity2``)
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import linalg

from .errors import CollinearDesign, DataError, EmptyDesign, MissingVariable, UnknownPreset

ANOMALY_TRANSFORMS = ("abs", "square", "identity", "asymmetric")
TRENDS = ("none", "linear", "quadratic", "cubic", "split")
DISTRIBUTIONS = ("exponential", "halfnormal")

ANOMALIES = ("zT", "zR", "L.zT", "L.zR")
_ALIASES = {"T": "Tbar", "R": "Rbar", "k": "lnk", "ln(k)": "lnk", "G": "polity2"}
_DISPLAY = {"Tbar": "T", "Rbar": "R"}
# ordering of factors inside a term name: dummies and covariates first, then climate, then weather
_RANK = {"P": 0, "P25": 0, "H": 1, "lnk": 3, "trend": 4, "Tbar": 5, "Rbar": 6,
         "zT": 8, "zR": 8, "L.zT": 9, "L.zR": 9}

COLLINEARITY_RTOL = 1e-10


def _canonical(name):
    name = name.strip()
    m = re.fullmatch(r"\|(.+)\|", name)
    if m:
        name = m.group(1)
    name = name.rstrip("+-") if name.rstrip("+-") in ANOMALIES else name
    return _ALIASES.get(name, name)


@dataclass(frozen=True, order=True)
class Term:
    """Product of integer powers of variables; identified by its sorted factor list."""

    factors: tuple

    def __post_init__(self):
        if not self.factors:
            raise DataError("a term needs at least one factor")
        merged = {}
        for var, power in self.factors:
            if int(power) < 1:
                raise DataError(f"power of {var} must be >= 1")
            merged[var] = merged.get(var, 0) + int(power)
        for var, power in merged.items():
            if var in ANOMALIES and power != 1:
                raise DataError(f"anomaly {var} enters through the transform; power must be 1")
        ordered = tuple(sorted(merged.items(), key=lambda f: (_RANK.get(f[0], 2), f[0])))
        object.__setattr__(self, "factors", ordered)

    @classmethod
    def parse(cls, text):
        """Parse ``"P*T^2"``, ``"lnk*|zR|"`` and similar."""
        factors = []
        for part in text.replace(" ", "").split("*"):
            if not part:
                raise DataError(f"malformed term {text!r}")
            m = re.fullmatch(r"(.+?)\^(\d+)", part)
            if m and not part.startswith("|"):
                var = _canonical(m.group(1))
                # zT^2 names the squared transform; the factor itself has power one
                factors.append((var, 1 if var in ANOMALIES else int(m.group(2))))
            elif m and part.startswith("|"):
                # |zT|^2 style: the power belongs to the transform, not the factor
                factors.append((_canonical(m.group(1)), 1))
            else:
                factors.append((_canonical(part), 1))
        return cls(tuple(factors))

    @property
    def variables(self):
        return tuple(v for v, _ in self.factors)

    @property
    def has_anomaly(self):
        return any(v in ANOMALIES for v in self.variables)

    def without(self, var):
        """Remaining factors after removing one power of ``var``; None if nothing remains."""
        rest = []
        for v, p in self.factors:
            if v == var:
                if p > 1:
                    rest.append((v, p - 1))
            else:
                rest.append((v, p))
        return Term(tuple(rest)) if rest else None

    def power_of(self, var):
        return dict(self.factors).get(var, 0)

    def labels(self, transform="abs"):
        """Column labels; more than one only for the asymmetric transform."""
        parts = [[]]
        for var, power in self.factors:
            if var in ANOMALIES:
                if transform == "asymmetric":
                    parts = [p + [s] for p in parts for s in (f"{var}+", f"{var}-")]
                    continue
                shown = {"abs": f"|{var}|", "square": f"{var}^2", "identity": var}[transform]
            else:
                shown = _DISPLAY.get(var, var) + (f"^{power}" if power > 1 else "")
            parts = [p + [shown] for p in parts]
        return ["*".join(p) for p in parts]

    def __str__(self):
        return self.labels("abs")[0]


def terms(*texts):
    return tuple(Term.parse(t) for t in texts)


@dataclass(frozen=True)
class ModelSpec:
    """Frontier terms, inefficiency covariates, anomaly transform, trend and distribution.

    The inefficiency equation always carries a constant; ``inefficiency`` lists the
    non-constant covariates only. First differencing forces ``trend='none'`` and
    removes the country effects, which differencing absorbs.
    """

    name: str = "custom"
    frontier: tuple = ()
    inefficiency: tuple = ()
    anomaly: str = "abs"
    trend: str = "linear"
    distribution: str = "exponential"
    fixed_effects: bool = True
    first_difference: bool = False
    lagged_anomalies: bool = False
    split_by: str = "P"

    def __post_init__(self):
        if self.anomaly not in ANOMALY_TRANSFORMS:
            raise DataError(f"unknown anomaly transform {self.anomaly!r}")
        if self.trend not in TRENDS:
            raise DataError(f"unknown trend {self.trend!r}")
        if self.distribution not in DISTRIBUTIONS:
            raise DataError(f"unknown distribution {self.distribution!r}")
        fr = tuple(t if isinstance(t, Term) else Term.parse(t) for t in self.frontier)
        ie = tuple(t if isinstance(t, Term) else Term.parse(t) for t in self.inefficiency)
        object.__setattr__(self, "frontier", fr)
        object.__setattr__(self, "inefficiency", ie)
        if self.first_difference:
            object.__setattr__(self, "trend", "none")
            object.__setattr__(self, "fixed_effects", False)

    def lagged_terms(self):
        """Lagged copies of anomaly-bearing inefficiency terms (empty unless the flag is set)."""
        if not self.lagged_anomalies:
            return ()
        out = []
        for t in self.inefficiency:
            if t.has_anomaly and not any(v.startswith("L.") for v in t.variables):
                out.append(Term(tuple((("L." + v) if v in ("zT", "zR") else v, p) for v, p in t.factors)))
        return tuple(out)

    @property
    def all_inefficiency(self):
        return self.inefficiency + self.lagged_terms()

    def variables(self):
        names = set()
        for t in self.frontier + self.all_inefficiency:
            names.update(t.variables)
        if self.trend == "split":
            names.add(self.split_by)
        return names


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

_F1 = ("lnk", "T", "T^2", "R", "R^2")
_F2 = _F1 + ("P*T", "P*T^2", "P*R", "P*R^2")
_F5 = _F2 + ("T*R", "P*T*R")
_F6 = _F1 + ("T*R", "P*R", "P*R^2", "P*T*R")
_I1 = ("|zT|", "|zR|")
_I3 = _I1 + ("P*|zT|", "P*|zR|")
_I4 = _I3 + ("H*|zT|", "H*|zR|")


def _preset_table():
    base = dict(frontier=_F6, inefficiency=_I4)
    p = {
        "t2c1": dict(frontier=_F1, inefficiency=_I1),
        "t2c2": dict(frontier=_F2, inefficiency=_I1),
        "t2c3": dict(frontier=_F2, inefficiency=_I3),
        "t2c4": dict(frontier=_F2, inefficiency=_I4),
        "t2c5": dict(frontier=_F5, inefficiency=_I4),
        "t2c6": base,
        "t3c2": dict(frontier=tuple(t.replace("P*", "P25*") for t in _F6),
                     inefficiency=tuple(t.replace("P*", "P25*") for t in _I4)),
        "t3c3": dict(base, anomaly="square"),
        "t3c4": dict(base, anomaly="identity"),
        "t3c5": dict(base, anomaly="asymmetric"),
        "t3c6": dict(frontier=_F6 + _I4, inefficiency=()),
        "t3c7": dict(base, distribution="halfnormal"),
        "t4c2": dict(frontier=_F1 + ("T*R", "lnk*R", "lnk*R^2", "lnk*T*R"), inefficiency=_I4),
        "t4c3": dict(frontier=_F1 + ("T*R", "lnk*R", "lnk*R^2", "lnk*T*R"),
                     inefficiency=("|zT|", "|zR|", "lnk*|zT|", "lnk*|zR|", "H*|zT|", "H*|zR|")),
        "t4c4": dict(frontier=_F1 + ("T*R", "polity2", "polity2*R", "polity2*R^2", "polity2*T*R"),
                     inefficiency=_I4),
        "ta2_notrend": dict(base, trend="none"),
        "ta2_linear": base,
        "ta2_quad": dict(base, trend="quadratic"),
        "ta2_cubic": dict(base, trend="cubic"),
        "ta2_split": dict(base, trend="split"),
        "ta2_fd": dict(base, first_difference=True, lagged_anomalies=True),
    }
    return p


PRESETS = tuple(_preset_table())


def preset(name):
    """ModelSpec for a named table column (``t2c1`` .. ``ta2_fd``)."""
    table = _preset_table()
    if name not in table:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(table)}")
    return ModelSpec(name=name, **table[name])


# --------------------------------------------------------------------------
# plain-text spec files
# --------------------------------------------------------------------------

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}
_SPEC_KEYS = ("name", "frontier", "inefficiency", "anomaly", "trend", "distribution",
              "fixed_effects", "first_difference", "lagged_anomalies", "split_by")


def parse_spec(text):
    """Read the ``key = value`` spec format; term lists are comma separated."""
    kw = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"spec line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _SPEC_KEYS:
            raise DataError(f"spec line {lineno}: unknown key {key!r}")
        if key in ("frontier", "inefficiency"):
            kw[key] = tuple(Term.parse(v) for v in value.split(",") if v.strip())
        elif key in ("fixed_effects", "first_difference", "lagged_anomalies"):
            if value.lower() not in _BOOL:
                raise DataError(f"spec line {lineno}: {key} must be true or false")
            kw[key] = _BOOL[value.lower()]
        else:
            kw[key] = value
    return ModelSpec(**kw)


def read_spec(path):
    with open(path) as fh:
        return parse_spec(fh.read())


def format_spec(spec):
    lines = [
        f"name = {spec.name}",
        "frontier = " + ", ".join(str(t) for t in spec.frontier),
        "inefficiency = " + ", ".join(str(t) for t in spec.inefficiency),
        f"anomaly = {spec.anomaly}",
        f"trend = {spec.trend}",
        f"distribution = {spec.distribution}",
        f"fixed_effects = {str(spec.fixed_effects).lower()}",
        f"first_difference = {str(spec.first_difference).lower()}",
        f"lagged_anomalies = {str(spec.lagged_anomalies).lower()}",
        f"split_by = {spec.split_by}",
    ]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# design matrices
# --------------------------------------------------------------------------

@dataclass
class Design:
    """Response, frontier regressors ``X``, inefficiency covariates ``Z`` and cluster ids."""

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    clusters: np.ndarray
    x_names: list
    z_names: list
    countries: np.ndarray
    years: np.ndarray
    spec: ModelSpec = None
    groups: list = field(default_factory=list)
    trend_origin: float = 0.0

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def n_params(self):
        return self.X.shape[1] + 1 + self.Z.shape[1]

    def param_names(self):
        return list(self.x_names) + ["ln_sigma_v"] + ["ineff:" + z for z in self.z_names]

    def subset(self, rows):
        rows = np.asarray(rows)
        return replace(self, y=self.y[rows], X=self.X[rows], Z=self.Z[rows],
                       clusters=self.clusters[rows], countries=self.countries[rows],
                       years=self.years[rows])


def transform_anomaly(z, kind):
    """Transformed anomaly columns; two columns (positive, negative part) for ``asymmetric``."""
    z = np.asarray(z, dtype=float)
    if kind == "abs":
        return [np.abs(z)]
    if kind == "square":
        return [z * z]
    if kind == "identity":
        return [z.copy()]
    if kind == "asymmetric":
        return [np.maximum(z, 0.0), np.maximum(-z, 0.0)]
    raise DataError(f"unknown anomaly transform {kind!r}")


def _column(panel, var):
    if var not in panel.columns:
        raise MissingVariable(var)
    col = pd.to_numeric(panel[var], errors="coerce").to_numpy(dtype=float)
    if not np.all(np.isfinite(col)):
        raise DataError(f"variable {var!r} has missing or non-finite values")
    return col


def term_columns(panel, term, transform, cache=None):
    """Evaluate a term on every panel row; returns a list of columns (labels follow ``Term.labels``)."""
    cache = {} if cache is None else cache

    def get(var):
        if var not in cache:
            cache[var] = _column(panel, var)
        return cache[var]

    cols = [np.ones(len(panel))]
    for var, power in term.factors:
        if var in ANOMALIES:
            parts = transform_anomaly(get(var), transform)
            cols = [c * p for c in cols for p in parts]
        else:
            v = get(var) ** power
            cols = [c * v for c in cols]
    return cols


def _check_rank(M, names, which):
    if M.shape[1] == 0:
        return
    if M.shape[0] < M.shape[1]:
        raise CollinearDesign(names[M.shape[0]:], which)
    _, R, piv = linalg.qr(M, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d[0] == 0:
        raise CollinearDesign(names, which)
    rank = int(np.sum(d > COLLINEARITY_RTOL * d[0]))
    if rank < M.shape[1]:
        raise CollinearDesign([names[i] for i in sorted(piv[rank:])], which)


def _add_trend(panel, spec, origin):
    t = panel["year"].to_numpy(dtype=float) - origin
    cols, names = [], []
    if spec.trend in ("linear", "quadratic", "cubic", "split"):
        cols.append(t)
        names.append("trend")
    if spec.trend in ("quadratic", "cubic"):
        cols.append(t ** 2)
        names.append("trend^2")
    if spec.trend == "cubic":
        cols.append(t ** 3)
        names.append("trend^3")
    if spec.trend == "split":
        cols.append(_column(panel, spec.split_by) * t)
        names.append(f"{spec.split_by}*trend")
    return cols, names


def _with_lags(panel, spec):
    """Add ``L.zT``/``L.zR`` columns and drop rows whose previous year is absent."""
    needed = {v for t in spec.all_inefficiency + spec.frontier for v in t.variables if v.startswith("L.")}
    if not needed:
        return panel
    prev = panel[["country", "year"] + [v[2:] for v in sorted(needed)]].copy()
    prev["year"] = prev["year"] + 1
    prev = prev.rename(columns={v[2:]: v for v in needed})
    out = panel.merge(prev, on=["country", "year"], how="left", sort=False)
    keep = out[sorted(needed)].notna().all(axis=1).to_numpy()
    return out.loc[keep].reset_index(drop=True)


def _matrices(panel, spec, cache=None):
    cache = {} if cache is None else cache
    x_cols, x_names = [], []
    for t in spec.frontier:
        x_cols += term_columns(panel, t, spec.anomaly, cache)
        x_names += t.labels(spec.anomaly)
    z_cols, z_names = [np.ones(len(panel))], ["const"]
    for t in spec.all_inefficiency:
        z_cols += term_columns(panel, t, spec.anomaly, cache)
        z_names += t.labels(spec.anomaly)
    return x_cols, x_names, z_cols, z_names


def build_design(panel, spec):
    """Compile a panel and a ModelSpec into a :class:`Design`.

    Country effects use a global intercept plus one dummy for every country but
    the first in sorted order. Row order of the panel is preserved.
    """
    if spec.first_difference:
        return first_difference(panel, spec)
    for var in spec.variables():
        if var not in panel.columns and not var.startswith("L.") and var != "trend":
            raise MissingVariable(var)
    panel = panel.reset_index(drop=True)
    if "trend" in {v for t in spec.frontier for v in t.variables}:
        panel = panel.assign(trend=panel["year"] - (panel["year"].min() + panel["year"].max()) / 2)
    panel = _with_lags(panel, spec)
    if len(panel) == 0:
        raise EmptyDesign("no rows left to estimate on")

    countries = panel["country"].astype(str).to_numpy()
    groups = sorted(set(countries))
    codes = {c: i for i, c in enumerate(groups)}
    clusters = np.array([codes[c] for c in countries], dtype=np.int64)
    years = panel["year"].to_numpy(dtype=np.int64)
    origin = (years.min() + years.max()) / 2.0

    cols, names = [np.ones(len(panel))], ["const"]
    if spec.fixed_effects:
        for g in groups[1:]:
            cols.append((countries == g).astype(float))
            names.append(f"fe[{g}]")
    x_cols, x_names, z_cols, z_names = _matrices(panel, spec)
    cols += x_cols
    names += x_names
    tcols, tnames = _add_trend(panel, spec, origin)
    cols += tcols
    names += tnames

    X = np.column_stack(cols)
    Z = np.column_stack(z_cols)
    _check_rank(X, names, "X")
    _check_rank(Z, z_names, "Z")
    y = _column(panel, "lny")
    return Design(y=y, X=X, Z=Z, clusters=clusters, x_names=names, z_names=z_names,
                  countries=countries, years=years, spec=spec, groups=groups, trend_origin=origin)


def first_difference(panel, spec):
    """Design in first differences: ``y = diff(lny)``, frontier terms differenced.

    Inefficiency covariates stay in levels (plus lags when requested). Only
    pairs of consecutive years count; a gap starts the country afresh. A global
    intercept (drift) is kept; country effects and trends are not.
    """
    if not spec.first_difference:
        spec = replace(spec, first_difference=True)
    for var in spec.variables():
        if var not in panel.columns and not var.startswith("L."):
            raise MissingVariable(var)
    p = panel.sort_values(["country", "year"]).reset_index(drop=True)
    cache = {}
    x_cols, x_names, _, _ = _matrices(p, replace(spec, inefficiency=(), lagged_anomalies=False), cache)
    lny = _column(p, "lny")

    country = p["country"].astype(str).to_numpy()
    year = p["year"].to_numpy(dtype=np.int64)
    has_prev = np.zeros(len(p), dtype=bool)
    has_prev[1:] = (country[1:] == country[:-1]) & (year[1:] == year[:-1] + 1)
    idx = np.flatnonzero(has_prev)
    if idx.size == 0:
        raise EmptyDesign("no consecutive country-years to difference")

    y = lny[idx] - lny[idx - 1]
    dX = [c[idx] - c[idx - 1] for c in x_cols]
    X = np.column_stack([np.ones(idx.size)] + dX)
    names = ["const"] + [f"D.{n}" for n in x_names]

    # lags of anomalies are previous-row values, valid exactly where has_prev holds
    lagged = p.copy()
    for v in ("zT", "zR"):
        if v in p.columns:
            lag = np.full(len(p), np.nan)
            lag[idx] = p[v].to_numpy(dtype=float)[idx - 1]
            lagged["L." + v] = lag
    rows = lagged.iloc[idx].reset_index(drop=True)
    z_cols, z_names = [np.ones(idx.size)], ["const"]
    for t in spec.all_inefficiency:
        z_cols += term_columns(rows, t, spec.anomaly)
        z_names += t.labels(spec.anomaly)
    Z = np.column_stack(z_cols)
    _check_rank(X, names, "X")
    _check_rank(Z, z_names, "Z")

    groups = sorted(set(country[idx]))
    codes = {c: i for i, c in enumerate(groups)}
    clusters = np.array([codes[c] for c in country[idx]], dtype=np.int64)
    return Design(y=y, X=X, Z=Z, clusters=clusters, x_names=names, z_names=z_names,
                  countries=country[idx], years=year[idx], spec=spec, groups=groups,
                  trend_origin=float((year.min() + year.max()) / 2.0))
