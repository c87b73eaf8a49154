"""Check that frontier residuals are stationary across countries.

Each country's series gets a Dickey-Fuller t statistic. The panel statistic
standardizes their average with the null moments for the series length, so
large negative values reject a unit root in every series.
"""
import numpy as np
import pandas as pd

from climfront import urtests

rng = np.random.default_rng(0)
rows = []
for i in range(20):
    e = rng.standard_normal(60)
    stationary = np.empty(60)
    stationary[0] = e[0]
    for t in range(1, 60):
        stationary[t] = 0.5 * stationary[t - 1] + e[t]
    rows += [(f"S{i:02d}", 1950 + t, stationary[t], np.cumsum(e)[t]) for t in range(60)]
data = pd.DataFrame(rows, columns=["country", "year", "stationary", "walk"])

for column in ("stationary", "walk"):
    res = urtests.ips_test(data, value=column)
    print(f"{column:>10}: statistic {res.statistic:8.3f}, p-value {res.p_value:.4f}, reject {res.reject()}")

print("\nper-series detail for the stationary panel")
print(urtests.ips_test(data, value="stationary").detail().head().round(3))
