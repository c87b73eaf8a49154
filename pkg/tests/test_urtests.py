import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from climfront import urtests
from climfront.errors import DegenerateSeries, InvalidInput, NoUsableSeries, TooShort
from oracles import ols

# 5% Dickey-Fuller critical value, intercept, T = 100
DF_CRIT_5PCT_T100 = -2.89


def df_oracle(y, lags=0):
    """Dickey-Fuller t-statistic via the normal equations."""
    dy = np.diff(y)
    rows = []
    for t in range(lags, dy.size):
        rows.append([1.0, y[t]] + [dy[t - j] for j in range(1, lags + 1)])
    b, se = ols(dy[lags:], np.array(rows))
    return b[1] / se[1]


def test_ramp_is_degenerate():
    with pytest.raises(DegenerateSeries):
        urtests.adf_t(np.arange(1.0, 13.0))


def test_short_ramp_too_short():
    # the five-point ramp is below the minimum length
    with pytest.raises(TooShort):
        urtests.adf_t(np.arange(1.0, 6.0))


def test_white_noise_matches_oracle():
    y = np.random.default_rng(42).standard_normal(100)
    assert urtests.adf_t(y) == pytest.approx(df_oracle(y), abs=1e-10)
    assert urtests.adf_t(y, lags=2) == pytest.approx(df_oracle(y, 2), abs=1e-10)
    assert urtests.adf_t(y) < DF_CRIT_5PCT_T100


def test_random_walk_fails_to_reject():
    y = np.cumsum(np.random.default_rng(7).standard_normal(100))
    assert urtests.adf_t(y) > DF_CRIT_5PCT_T100


def test_batch_matches_single():
    Y = np.cumsum(np.random.default_rng(1).standard_normal((5, 40)), axis=1)
    np.testing.assert_allclose(urtests.adf_t_batch(Y), [urtests.adf_t(r) for r in Y], rtol=1e-10)


def test_invalid_series():
    with pytest.raises(InvalidInput):
        urtests.adf_t([np.nan] * 20)
    with pytest.raises(InvalidInput):
        urtests.adf_t(np.ones(20), lags=-1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100), st.floats(-1e3, 1e3), st.integers(0, 2))
def test_adf_scale_and_shift_invariant(a, b, lags):
    y = np.cumsum(np.random.default_rng(3).standard_normal(50))
    assert urtests.adf_t(a * y + b, lags) == pytest.approx(urtests.adf_t(y, lags), rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("n_obs", [19, 49])
def test_moment_table_matches_simulation(n_obs):
    # independent Monte Carlo of the null distribution, rows of length n_obs + 1
    rng = np.random.default_rng(n_obs)
    Y = np.cumsum(rng.standard_normal((40_000, n_obs + 1)), axis=1)
    d = np.diff(Y, axis=1)
    t = np.array([ols(r, np.column_stack([np.ones(n_obs), y[:-1]])) for r, y in zip(d[:2000], Y[:2000])],
                 dtype=object)
    t_small = np.array([b[1] / se[1] for b, se in t])
    t_all = urtests.adf_t_batch(Y)
    np.testing.assert_allclose(t_all[:2000], t_small, rtol=1e-9)
    mean, var = urtests.t_moments(n_obs)
    assert t_all.mean() == pytest.approx(mean, abs=4 * t_all.std() / np.sqrt(t_all.size) + 0.003)
    assert t_all.var() == pytest.approx(var, rel=0.03)


def test_moments_interpolate_and_clamp():
    m10, v10 = urtests.t_moments(10)
    m15, v15 = urtests.t_moments(15)
    m, v = urtests.t_moments(12.5)
    assert m == pytest.approx((m10 + m15) / 2) and v == pytest.approx((v10 + v15) / 2)
    assert urtests.t_moments(500) == urtests.t_moments(100)


def _panel(n=8, length=30, seed=0, kind="rw"):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        e = rng.standard_normal(length)
        y = np.cumsum(e) if kind == "rw" else e
        rows += [(f"A{i}", 1960 + t, y[t]) for t in range(length)]
    return pd.DataFrame(rows, columns=["country", "year", "value"])


def test_ips_formula():
    p = _panel()
    res = urtests.ips_test(p)
    t = res.t_stats.to_numpy()
    mean, var = urtests.t_moments(29)
    z = np.sqrt(len(t)) * (t.mean() - mean) / np.sqrt(var)
    assert res.statistic == pytest.approx(z, rel=1e-12)
    assert res.p_value == pytest.approx(stats.norm.cdf(z), rel=1e-12)
    assert 0 <= res.p_value <= 1 and np.isfinite(res.statistic)


def test_stationary_panel_rejects():
    assert urtests.ips_test(_panel(kind="wn")).reject()


@settings(max_examples=15, deadline=None)
@given(st.randoms(), st.floats(0.1, 10), st.floats(-50, 50))
def test_ips_invariances(rnd, a, b):
    p = _panel(seed=2)
    base = urtests.ips_test(p)
    order = list(range(len(p)))
    rnd.shuffle(order)
    shuffled = p.iloc[order]
    assert urtests.ips_test(shuffled).statistic == pytest.approx(base.statistic, rel=1e-12)
    scaled = p.assign(value=a * p["value"] + b)
    assert urtests.ips_test(scaled).statistic == pytest.approx(base.statistic, rel=1e-7, abs=1e-9)


def test_unbalanced_and_skips():
    p = _panel(n=6, length=30, seed=3)
    p = p[~((p.country == "A0") & (p.year >= 1965))]      # 5 years left
    p = p[~((p.country == "A1") & (p.year == 1975))]       # gap: longest run kept
    res = urtests.ips_test(p)
    assert "A0" in res.skipped and "A0" not in res.used
    assert res.n_obs["A1"] == 15 - 1     # 1960-1974 beats 1976-1989
    t = res.t_stats.to_numpy()
    mean, var = urtests.t_moments(res.n_obs.to_numpy())
    z = np.sqrt(len(t)) * (t.mean() - mean.mean()) / np.sqrt(var.mean())
    assert res.statistic == pytest.approx(z, rel=1e-12)
    assert set(res.detail().columns) == {"t", "n_obs", "null_mean", "null_var"}


@settings(max_examples=15, deadline=None)
@given(st.integers(10, 40), st.integers(0, 20))
def test_min_length_monotone(m1, extra):
    rng = np.random.default_rng(4)
    series = {f"S{i}": np.cumsum(rng.standard_normal(n)) for i, n in enumerate([12, 15, 20, 25, 30, 45, 60])}
    used = []
    for m in (m1, m1 + extra):
        try:
            used.append(len(urtests.ips_test(series, min_length=m).used))
        except NoUsableSeries:
            used.append(0)
    assert used[1] <= used[0]


def test_no_usable_series():
    with pytest.raises(NoUsableSeries):
        urtests.ips_test({"a": np.arange(5.0), "b": np.arange(6.0)})


def test_rejection_rate_iid_vs_walks():
    walks = urtests.rejection_rate(lambda r, s: np.cumsum(r.standard_normal(s), axis=-1), n_reps=100, seed=1)
    noise = urtests.rejection_rate(lambda r, s: r.standard_normal(s), n_reps=50, seed=1)
    assert walks < 0.15
    assert noise == 1.0
