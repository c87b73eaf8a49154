"""Turn raw gridded weather and economic tables into an estimation panel.

Monthly cell temperatures and precipitation are weighted by population into
country values, annualized, compared with trailing climate normals and
standardized into anomalies. The economic table supplies output and capital
per worker. Poor and hot dummies are attached last.
"""
from synthetic_inputs import make_raw_inputs

from climfront import dataio

grid, weights, econ, high_income = make_raw_inputs()
panel, dropped = dataio.build_panel(grid, weights, econ, high_income=high_income, window=20)

print("panel rows:", len(panel), " countries:", panel["country"].nunique(),
      " years:", panel["year"].min(), "-", panel["year"].max())
print(panel[["country", "year", "lny", "lnk", "Tbar", "Rbar", "zT", "zR", "P", "H"]].head(), "\n")
print("rows dropped during assembly:", dropped, "\n")
print(dataio.describe(panel).round(3))
