import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from climfront import scenario as sc
from climfront.errors import DegenerateVariance, EmptyInput, InvalidInput, MissingVariable
from oracles import mc_abs_shift

RICH = sc.CountryBaseline("R", y=40000.0, workers=1e7, population=2e7, Tbar=10.0, Rbar=9.375,
                          tau=1.0, rho=1.0, P=0, H=0)
FRONTIER = {"T": 0.226, "T^2": -0.00457, "T*R": -0.0199}
GAMMA = (-2.0, -0.202, -0.266, 0.0, 0.0, 0.0, 0.0)


def quad_abs_shift(delta):
    """E|Z + delta| by quadrature of |x| against the Normal(delta, 1) density."""
    f = lambda x: abs(x) * stats.norm.pdf(x - delta)
    return sum(integrate.quad(f, a, b, epsabs=1e-13)[0] for a, b in ((-np.inf, 0), (0, np.inf)))


def random_baselines(n, seed):
    rng = np.random.default_rng(seed)
    return [sc.CountryBaseline(f"X{i}", y=rng.uniform(1e3, 5e4), workers=rng.uniform(1e5, 1e8),
                               population=rng.uniform(1e5, 1e8), Tbar=rng.uniform(-2, 29),
                               Rbar=rng.uniform(1, 20), tau=rng.uniform(0.3, 1), rho=rng.uniform(0.1, 2),
                               P=int(rng.uniform() < 0.6), H=int(rng.uniform() < 0.25))
            for i in range(n)]


# --------------------------------------------------------------------------
# expected anomalies
# --------------------------------------------------------------------------

@pytest.mark.parametrize("delta,printed", [(0.0, 0.797885), (0.45, 0.877333), (3.0, 3.000764)])
def test_expected_abs_shift_oracles(delta, printed):
    val = sc.expected_abs_shift(delta)
    assert val == pytest.approx(quad_abs_shift(delta), abs=1e-12)
    # printed values are truncated at the sixth decimal
    assert val == pytest.approx(printed, abs=5e-6)
    mean, se = mc_abs_shift(delta, n=10**6)
    assert abs(val - mean) < 4 * se


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 20), st.floats(-20, 20))
def test_expected_abs_shift_properties(a, b):
    floor = math.sqrt(2 / math.pi)
    assert sc.expected_abs_shift(a) == sc.expected_abs_shift(-a)
    assert sc.expected_abs_shift(a) >= floor - 1e-15
    if abs(a) > 1e-6:
        assert sc.expected_abs_shift(a) > floor
    if abs(a) < abs(b):
        assert sc.expected_abs_shift(a) <= sc.expected_abs_shift(b)
    assert sc.expected_abs_shift(a) - abs(a) >= -1e-12


def test_expected_abs_shift_asymptote():
    assert sc.expected_abs_shift(0.0) == math.sqrt(2 / math.pi)
    assert abs(sc.expected_abs_shift(40.0) - 40.0) < 1e-12


@pytest.mark.parametrize("kind,fn", [("square", lambda x: x * x), ("identity", lambda x: x),
                                     ("pos", lambda x: max(x, 0.0)), ("neg", lambda x: max(-x, 0.0))])
def test_expected_transformed_quadrature(kind, fn):
    for d in (-1.3, 0.0, 0.45, 2.0):
        q = integrate.quad(lambda x: fn(x) * stats.norm.pdf(x - d), -np.inf, np.inf, epsabs=1e-12)[0]
        assert sc.expected_transformed(d, kind) == pytest.approx(q, abs=1e-9)
    with pytest.raises(InvalidInput):
        sc.expected_transformed(0.0, "cube")


def test_anomaly_shift_construction():
    s = sc.anomaly_shifts(RICH, sc.ClimateScenario(3.0, 20.0))
    assert s["zT"] == pytest.approx(0.45)
    assert s["zR"] == pytest.approx(15 * 9.375 * 0.2 / 100)
    with pytest.raises(DegenerateVariance):
        sc.anomaly_shifts(sc.CountryBaseline("Z", 1, 1, 1, 10, 5, 0.0, 1.0), sc.ClimateScenario(1, 0))


# --------------------------------------------------------------------------
# channels
# --------------------------------------------------------------------------

def test_frontier_worked_example():
    expected = math.exp(0.226 * 1 - 0.00457 * 21 - 0.0199 * 9.375)
    assert sc.frontier_impact(RICH, FRONTIER, sc.ClimateScenario(1.0, 0.0)) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.9451, abs=1e-4)


def test_frontier_uses_own_poor_dummy():
    coefs = dict(FRONTIER, **{"P*T": 0.1})
    poor = sc.CountryBaseline("P", 1, 1, 1, 10, 9.375, 1, 1, P=1)
    s = sc.ClimateScenario(1.0, 0.0)
    assert sc.frontier_impact(poor, coefs, s) == pytest.approx(sc.frontier_impact(RICH, FRONTIER, s) * math.exp(0.1))
    assert sc.frontier_impact(RICH, coefs, s) == pytest.approx(sc.frontier_impact(RICH, FRONTIER, s))


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 8), st.floats(-40, 40))
def test_frontier_composition(dT, dR):
    coefs = {"T": 0.2, "T^2": -0.005, "R": 0.03, "R^2": -0.001, "T*R": -0.01, "P*T*R": 0.002}
    b = random_baselines(1, 3)[0]
    joint = sc.frontier_impact(b, coefs, sc.ClimateScenario(dT, dR))
    step1 = sc.frontier_impact(b, coefs, sc.ClimateScenario(dT, 0.0))
    moved = sc.CountryBaseline(b.country, b.y, b.workers, b.population, b.Tbar + dT, b.Rbar, b.tau, b.rho, b.P, b.H)
    step2 = sc.frontier_impact(moved, coefs, sc.ClimateScenario(0.0, dR))
    assert joint == pytest.approx(step1 * step2, rel=1e-12)


def test_inefficiency_worked_example():
    a = sc.expected_abs_shift(0.45)
    b = math.sqrt(2 / math.pi)
    # sigma_u = exp(g0 + gT E|zT| + gR E|zR|); rain is unchanged
    d_sigma = math.exp(-2 - 0.266 * b) * (math.exp(-0.202 * a) - math.exp(-0.202 * b))
    got = sc.inefficiency_impact(RICH, GAMMA, sc.ClimateScenario(3.0, 0.0))
    assert got == pytest.approx(math.exp(-d_sigma), rel=1e-14)
    assert got == pytest.approx(1.0014843, abs=1e-7)


def test_inefficiency_level_channel_and_halfnormal():
    s = sc.ClimateScenario(3.0, 0.0)
    base = math.exp(-2 - 0.202 * math.sqrt(2 / math.pi) - 0.266 * math.sqrt(2 / math.pi))
    new = math.exp(-2 - 0.202 * sc.expected_abs_shift(0.45) - 0.266 * math.sqrt(2 / math.pi))
    assert sc.inefficiency_impact(RICH, GAMMA, s, channel="level") == pytest.approx((1 + base) / (1 + new))
    hn = sc.inefficiency_impact(RICH, GAMMA, s, dist="halfnormal")
    assert hn == pytest.approx(math.exp(math.sqrt(2 / math.pi) * (base - new)))
    # E[exp(-u)] for half-normal u by Monte Carlo
    u = np.abs(np.random.default_rng(0).standard_normal(10**6)) * 0.7
    assert sc.expected_efficiency(0.7, "halfnormal") == pytest.approx(np.exp(-u).mean(), abs=3e-3)


def test_poor_hot_country_loses():
    gamma = {"const": -2.0, "|zT|": -0.2, "|zR|": -0.27, "P*|zT|": 0.5, "P*|zR|": 0.4,
             "H*|zT|": 0.3, "H*|zR|": 0.2}
    b = sc.CountryBaseline("PH", 1, 1, 1, 27, 10, 0.4, 1.0, P=1, H=1)
    assert sc.inefficiency_impact(b, gamma, sc.ClimateScenario(3.0, 20.0)) < 1.0


def test_gamma_requires_constant():
    with pytest.raises(MissingVariable):
        sc.inefficiency_impact(RICH, {"|zT|": -0.2}, sc.ClimateScenario(1, 0))
    with pytest.raises(InvalidInput):
        sc.inefficiency_impact(RICH, (-2.0, 0.1), sc.ClimateScenario(1, 0))


def test_empirical_baseline():
    extras = {f"mean_{k}_{a}": sc.expected_transformed(0.0, k) for a in ("zT", "zR", "L.zT", "L.zR")
              for k in ("abs", "square", "identity", "pos", "neg")}
    b = sc.CountryBaseline("E", 1, 1, 1, 10, 9.375, 1, 1, extras=extras)
    s = sc.ClimateScenario(3.0, 10.0)
    assert sc.inefficiency_impact(b, GAMMA, s, empirical_baseline=True) == pytest.approx(
        sc.inefficiency_impact(b, GAMMA, s))
    with pytest.raises(MissingVariable):
        sc.inefficiency_impact(RICH, GAMMA, s, empirical_baseline=True)


def test_zero_scenario_is_exactly_one():
    coefs = dict(FRONTIER, **{"ineff:" + k: v for k, v in zip(sc.BASE_GAMMA_NAMES, GAMMA)})
    res = sc.project(random_baselines(10, 1), coefs, sc.ClimateScenario(0.0, 0.0))
    assert (res.countries[["frontier", "inefficiency", "combined"]] == 1.0).all().all()
    assert all(v == 1.0 for v in res.aggregates.values())


# --------------------------------------------------------------------------
# aggregation
# --------------------------------------------------------------------------

def test_aggregate_examples():
    same = random_baselines(1, 0) * 3
    assert sc.aggregate_global([0.97] * 3, same, "average") == pytest.approx(0.97)
    assert sc.aggregate_global([0.97] * 3, same, "equity") == pytest.approx(0.97)
    two = [sc.CountryBaseline("a", 1, 1, 5, 10, 5, 1, 1), sc.CountryBaseline("b", 3, 1, 5, 10, 5, 1, 1)]
    assert sc.aggregate_global([0.9, 1.1], two, "equity") == pytest.approx(0.99499, abs=1e-5)
    with pytest.raises(EmptyInput):
        sc.aggregate_global([], [], "average")
    with pytest.raises(InvalidInput):
        sc.aggregate_global([0.9], two[:1], "median")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_equity_below_average_when_weights_match(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 30))
    m = rng.uniform(0.5, 1.5, n)
    out = rng.uniform(1, 100, n)
    bl = [sc.CountryBaseline(str(i), y=o, workers=1.0, population=o, Tbar=0, Rbar=1, tau=1, rho=1)
          for i, o in enumerate(out)]
    avg = sc.aggregate_global(m, bl, "average")
    assert sc.aggregate_global(m, bl, "equity") <= avg * (1 + 1e-12)
    assert m.min() * (1 - 1e-12) <= avg <= m.max() * (1 + 1e-12)


# --------------------------------------------------------------------------
# tables
# --------------------------------------------------------------------------

def test_projection_tables():
    coefs = dict(FRONTIER, **{"ineff:" + k: v for k, v in zip(sc.BASE_GAMMA_NAMES, GAMMA)})
    bl = random_baselines(6, 2)
    warming = [sc.ClimateScenario(float(d), 0.0) for d in range(1, 7)]
    curves, scatter = sc.emit_projection(bl, coefs, warming, sc.ClimateScenario(3.0, 20.0))
    assert len(curves) == 24 and list(curves.columns) == sc.CURVE_COLUMNS
    assert list(scatter.columns) == sc.SCATTER_COLUMNS and len(scatter) == 6
    res = sc.project(bl, coefs, sc.ClimateScenario(2.0, -10.0))
    c = res.countries
    assert (c[["frontier", "inefficiency", "combined"]] > 0).all().all()
    np.testing.assert_allclose(c["combined"], c["frontier"] * c["inefficiency"], rtol=1e-15)
    flat, _ = sc.emit_projection(bl, coefs, [sc.ClimateScenario(0.0, 0.0)])
    assert (flat["value"] == 1.0).all()
    with pytest.raises(EmptyInput):
        sc.emit_projection(bl, coefs, [])
    assert len(sc.default_grid()) == 12


def test_baseline_frame(raw_inputs):
    from climfront import dataio
    grid, weights, econ = raw_inputs
    panel, _ = dataio.build_panel(grid, weights, econ, {"C0", "C1"}, window=10)
    df = sc.baseline_frame(panel, econ)
    assert len(df) == panel.country.nunique()
    assert (df["year"] == panel["year"].max()).all()
    bl = sc.baselines_from_frame(df)
    assert bl[0].value("lnk") == pytest.approx(df["lnk"].iloc[0])
    with pytest.raises(InvalidInput):
        sc.baselines_from_frame(df.assign(population=0.0))
