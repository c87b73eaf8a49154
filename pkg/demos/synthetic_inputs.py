"""Small synthetic raw inputs shared by the demos.

The files mimic the real ingestion inputs: a monthly gridded weather table,
population weights per cell, an economic table and a high-income list.
"""
from pathlib import Path

import numpy as np
import pandas as pd


def make_raw_inputs(n_countries=12, years=range(1955, 2001), seed=0):
    rng = np.random.default_rng(seed)
    codes = [f"C{i:02d}" for i in range(n_countries)]
    cells, weights = [], []
    for i, c in enumerate(codes):
        for j in range(2):
            lat, lon = 5.25 + 2 * i, 10.25 + 0.5 * j
            cells.append((lat, lon, 4.0 + 2.0 * i, 3.0 + 0.5 * i))
            weights.append((lat, lon, c, float(j + 1)))
    rows = []
    for y in years:
        for m in range(1, 13):
            season = 3.0 * np.sin(2 * np.pi * m / 12)
            for lat, lon, t0, r0 in cells:
                rows.append((lat, lon, y, m, t0 + season + rng.normal(0, 0.8) + 0.01 * (y - years[0]),
                             max(0.0, r0 + rng.normal(0, 0.6))))
    grid = pd.DataFrame(rows, columns=["lat", "lon", "year", "month", "temperature_c", "precipitation_cm"])
    w = pd.DataFrame(weights, columns=["lat", "lon", "country", "weight"])

    econ = []
    for i, c in enumerate(codes):
        k = 20000.0 * (1 + i)
        labor = 1e6 * (1 + i % 4)
        for y in years:
            capital = k * labor * np.exp(0.02 * (y - years[0]) + rng.normal(0, 0.05))
            output = capital ** 0.6 * labor ** 0.4 * np.exp(rng.normal(0, 0.05) - rng.exponential(0.1))
            econ.append((c, y, output, capital, labor, 2.0 * labor))
    econ = pd.DataFrame(econ, columns=["country", "year", "output", "capital", "labor", "population"])
    high_income = codes[n_countries // 2:]
    return grid, w, econ, high_income


def write_raw_inputs(directory, **kwargs):
    """Write grid.csv, weights.csv, econ.csv and high_income.txt; return the directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grid, w, econ, high = make_raw_inputs(**kwargs)
    grid.to_csv(directory / "grid.csv", index=False)
    w.to_csv(directory / "weights.csv", index=False)
    econ.to_csv(directory / "econ.csv", index=False)
    (directory / "high_income.txt").write_text("\n".join(high) + "\n")
    return directory
