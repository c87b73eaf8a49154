import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from climfront import ecm
from climfront.errors import CollinearDesign, DataError, EmptyDesign, MissingGap


def unbalanced_panel(seed=0, n_countries=8, n_years=15, drop=0.15):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_countries):
        for t in range(n_years):
            if rng.uniform() > drop or t == 0:
                rows.append((f"K{i}", 1980 + t))
    p = pd.DataFrame(rows, columns=["country", "year"])
    n = len(p)
    p["lnk"] = rng.normal(10, 1, n)
    p["Tbar"] = rng.normal(15, 5, n)
    p["zT"] = rng.standard_normal(n)
    p["zR"] = rng.standard_normal(n)
    p["lny"] = 2.0 + 0.6 * p["lnk"] - 0.01 * p["Tbar"] + rng.normal(0, 0.1, n)
    return p


def dummy_oracle(p, cols):
    """Least squares with explicit country and year dummies (first level dropped)."""
    D = pd.get_dummies(p[["country", "year"]].astype(str), drop_first=True).to_numpy(dtype=float)
    X = np.column_stack([p[cols].to_numpy(dtype=float), np.ones(len(p)), D])
    b, *_ = np.linalg.lstsq(X, p["lny"].to_numpy(dtype=float), rcond=None)
    return b[:len(cols)], p["lny"].to_numpy() - X @ b


# --------------------------------------------------------------------------
# long run
# --------------------------------------------------------------------------

def test_within_transform_matches_dummies():
    p = unbalanced_panel()
    res = ecm.fit_cointegrating_vector(p, ("lnk", "T"))
    b, resid = dummy_oracle(p, ["lnk", "Tbar"])
    np.testing.assert_allclose(res.theta, b, atol=1e-9)
    merged = p.assign(oracle=resid).merge(res.V, on=["country", "year"])
    np.testing.assert_allclose(merged["V"], merged["oracle"], atol=1e-9)


def test_effects_reconstruct_fit():
    p = unbalanced_panel(1)
    res = ecm.fit_cointegrating_vector(p, ("lnk",))
    m = p.merge(res.V, on=["country", "year"])
    recon = (res.country_effects.reindex(m["country"]).to_numpy() + res.year_effects.reindex(m["year"]).to_numpy()
             + res.coef("lnk") * m["lnk"] + m["V"])
    np.testing.assert_allclose(recon, m["lny"], atol=1e-9)
    assert res.year_effects.iloc[0] == 0.0


def test_residuals_orthogonal_to_every_dummy_and_regressor():
    p = unbalanced_panel(2)
    res = ecm.fit_cointegrating_vector(p, ("lnk", "T"))
    m = p.merge(res.V, on=["country", "year"])
    scale = float(np.abs(m["lny"]).max())
    assert m.groupby("country")["V"].sum().abs().max() < 1e-8 * scale
    assert m.groupby("year")["V"].sum().abs().max() < 1e-8 * scale
    for c in ("lnk", "Tbar"):
        assert abs(float(m[c] @ m["V"])) < 1e-8 * scale * float(np.abs(m[c]).sum())


def test_noiseless_exact_fit():
    p = unbalanced_panel(3)
    effect = {c: i * 0.3 for i, c in enumerate(sorted(p.country.unique()))}
    p["lny"] = 2 + 1.0 * p["lnk"] + p["country"].map(effect)
    res = ecm.fit_cointegrating_vector(p, ("lnk",))
    assert res.coef("lnk") == pytest.approx(1.0, abs=1e-10)
    assert np.abs(res.V["V"]).max() < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.integers(-3000, 3000), st.integers(1, 7))
def test_year_relabel_invariance(shift, stretch):
    p = unbalanced_panel(4)
    a = ecm.fit_cointegrating_vector(p, ("lnk", "T"))
    b = ecm.fit_cointegrating_vector(p.assign(year=(p["year"] - 1980) * stretch + shift), ("lnk", "T"))
    np.testing.assert_allclose(b.theta, a.theta, atol=1e-10)
    np.testing.assert_allclose(b.V["V"].to_numpy(), a.V["V"].to_numpy(), atol=1e-10)


def test_nesting_lnk_only_is_two_way_residual():
    p = unbalanced_panel(5)
    res = ecm.fit_cointegrating_vector(p, ("lnk",))
    _, resid = dummy_oracle(p, ["lnk"])
    m = p.assign(oracle=resid).merge(res.V, on=["country", "year"])
    np.testing.assert_allclose(m["V"], m["oracle"], atol=1e-9)


def test_long_run_errors():
    p = unbalanced_panel()
    with pytest.raises(CollinearDesign):
        ecm.fit_cointegrating_vector(p.assign(Tbar=2 * p["lnk"]), ("lnk", "T"))
    with pytest.raises(DataError):
        ecm.fit_cointegrating_vector(p[p.country == "K0"], ("lnk",))


def test_clustered_covariance_oracle():
    p = unbalanced_panel(6)
    res = ecm.fit_cointegrating_vector(p, ("lnk",))
    # explicit-dummy sandwich, clustered by country, slope block
    D = pd.get_dummies(p[["country", "year"]].astype(str), drop_first=True).to_numpy(dtype=float)
    X = np.column_stack([p["lnk"], np.ones(len(p)), D])
    b, *_ = np.linalg.lstsq(X, p["lny"], rcond=None)
    e = p["lny"].to_numpy() - X @ b
    Xinv = np.linalg.pinv(X.T @ X)
    codes = pd.factorize(p["country"])[0]
    S = np.zeros((codes.max() + 1, X.shape[1]))
    np.add.at(S, codes, X * e[:, None])
    V = Xinv @ S.T @ S @ Xinv
    assert res.cov[0, 0] == pytest.approx(V[0, 0], rel=1e-6)


# --------------------------------------------------------------------------
# short run
# --------------------------------------------------------------------------

def test_short_run_oracle():
    p = ecm.simulate_ecm_panel(n_countries=6, n_years=40, seed=1)
    lr = ecm.fit_cointegrating_vector(p, ("lnk",))
    sr = ecm.fit_short_run(p, lr, ("zT", "zR"))
    assert sr.names == ["D.zT", "D.zR", "gap"]
    # oracle: explicit differences and country dummies
    p = p.merge(lr.V, on=["country", "year"]).sort_values(["country", "year"])
    g = p.groupby("country")
    d = pd.DataFrame({"country": p["country"], "dy": g["lny"].diff(), "dzT": g["zT"].diff(),
                      "dzR": g["zR"].diff(), "lag": g["V"].shift()}).dropna()
    D = pd.get_dummies(d["country"]).to_numpy(dtype=float)
    X = np.column_stack([d[["dzT", "dzR", "lag"]], D])
    b, *_ = np.linalg.lstsq(X, d["dy"], rcond=None)
    np.testing.assert_allclose(sr.psi, b[:3], atol=1e-10)
    assert sr.n_obs == len(d)
    assert np.all(np.isfinite(sr.table()["t"]))


def test_zero_anomalies_drop_columns():
    p = ecm.simulate_ecm_panel(n_countries=5, n_years=30, seed=2).assign(zT=0.0, zR=0.0)
    lr = ecm.fit_cointegrating_vector(p, ("lnk",))
    sr = ecm.fit_short_run(p, lr)
    assert sr.names == ["gap"]


def test_interactions_with_dummies():
    p = ecm.simulate_ecm_panel(n_countries=6, n_years=30, seed=3)
    p["P"] = (p["country"] < "C3").astype(int)
    lr = ecm.fit_cointegrating_vector(p, ("lnk",))
    sr = ecm.fit_short_run(p, lr, ("zT", "P*zT"), form="abs")
    assert sr.names == ["D.|zT|", "D.P*|zT|", "gap"]


def test_missing_gap_and_year_breaks():
    p = ecm.simulate_ecm_panel(n_countries=4, n_years=12, seed=4)
    lr = ecm.fit_cointegrating_vector(p, ("lnk",))
    with pytest.raises(MissingGap):
        ecm.fit_short_run(p, lr.V.iloc[1:])
    holed = p[p["year"] != 1905]
    lr2 = ecm.fit_cointegrating_vector(holed, ("lnk",))
    sr = ecm.fit_short_run(holed, lr2)
    assert 1905 not in set(sr.residuals["year"]) and 1906 not in set(sr.residuals["year"])
    assert sr.n_obs == 4 * (12 - 3)
    with pytest.raises(EmptyDesign):
        ecm.fit_short_run(p[p.year % 2 == 0], lr)


# --------------------------------------------------------------------------
# dynamics
# --------------------------------------------------------------------------

def test_half_life_closed_form():
    assert ecm.half_life(-0.06) == pytest.approx(math.log(0.5) / math.log(0.94), abs=0.01)
    assert ecm.half_life(-0.06) == pytest.approx(11.2, abs=0.05)
    assert ecm.half_life(0.01) == math.inf
    assert ecm.half_life(-1.0) == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.95, -0.005))
def test_half_life_matches_log_ratio(g):
    assert ecm.half_life(g) == pytest.approx(math.log(0.5) / math.log1p(g), rel=1e-9)


def test_impulse_response_geometric():
    path = ecm.impulse_response(-0.1, 5)
    np.testing.assert_allclose(path, 0.9 ** np.arange(6), rtol=1e-14)


def test_simulated_speed_recovered():
    p = ecm.simulate_ecm_panel(n_countries=50, n_years=400, seed=0)
    lr = ecm.fit_cointegrating_vector(p, ("lnk",))
    sr = ecm.fit_short_run(p, lr, ("zT",))
    assert lr.coef("lnk") == pytest.approx(0.6, abs=0.02)
    assert sr.adjustment_speed == pytest.approx(0.06, abs=0.02)
    assert sr.coef("D.zT") == pytest.approx(-0.002, abs=0.001)
