"""Long-run levels and short-run adjustment of output.

The long-run relation is estimated with country and year effects. Its
residual is the gap from the long-run path, and the short-run regression of
output growth on weather changes and the lagged gap gives the speed at which
economies close that gap.
"""
from climfront import ecm

panel = ecm.simulate_ecm_panel(n_countries=30, n_years=300, speed=0.06, seed=4)
coint = ecm.fit_cointegrating_vector(panel, terms=("lnk",))
print("long run\n", coint.table().round(4), "\n")

short = ecm.fit_short_run(panel, coint, terms=("zT", "zR"))
print("short run\n", short.table().round(4), "\n")
print(f"adjustment speed {short.adjustment_speed:.4f} per year, half-life {short.half_life():.1f} years")
print("impulse response, first five years:", ecm.impulse_response(short.gap, horizon=5).round(3))
