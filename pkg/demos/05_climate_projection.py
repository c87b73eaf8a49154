"""Translate a warming scenario into output changes.

Climate normals move the frontier. Weather anomalies move inefficiency,
because a warmer and drier climate changes how far typical years fall from
the trailing normal. Country multipliers are aggregated either by output
share or by population.
"""
from climfront import scenario

coefs = {"T": 0.05, "T^2": -0.0015, "R": 0.01,
         "ineff:const": -2.0, "ineff:|zT|": 0.1, "ineff:|zR|": 0.05,
         "ineff:P*|zT|": 0.2, "ineff:H*|zT|": 0.15}
baselines = [
    scenario.CountryBaseline("COLD_RICH", y=60000, workers=4e7, population=8e7,
                             Tbar=8.0, Rbar=7.0, tau=0.6, rho=1.2, P=0, H=0),
    scenario.CountryBaseline("HOT_POOR", y=3000, workers=3e7, population=7e7,
                             Tbar=27.0, Rbar=9.0, tau=0.4, rho=2.0, P=1, H=1),
    scenario.CountryBaseline("TEMPERATE", y=20000, workers=2e7, population=4e7,
                             Tbar=15.0, Rbar=6.0, tau=0.5, rho=1.5, P=0, H=0),
]
s = scenario.ClimateScenario(dT=3.0, dR_pct=-10.0, horizon=100.0)
res = scenario.project(baselines, coefs, s)
print(res.countries.round(4), "\n")
for (channel, mode), value in res.aggregates.items():
    print(f"{channel:>12} {mode:>8}: {value:.4f}")

curves, scatter = scenario.emit_projection(baselines, coefs, scenario.default_grid())
print("\n", curves.head(8).round(4))
