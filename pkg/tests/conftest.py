import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def make_raw_inputs(n_countries=6, years=range(1960, 1996), seed=0, with_population=True):
    """Tiny gridded weather, population weights and economic table.

    Every country owns two cells except ``SGP``, which owns none and relies on
    the fallback cell.
    """
    rng = np.random.default_rng(seed)
    codes = [f"C{i}" for i in range(n_countries - 1)] + ["SGP"]
    cells, weights = [], []
    for i, c in enumerate(codes[:-1]):
        for j in range(2):
            lat, lon = 10.25 + i, 20.25 + 0.5 * j
            cells.append((lat, lon, 5.0 + 4.0 * i, 2.0 + i))
            weights.append((lat, lon, c, float(j + 1)))
    cells.append((1.25, 103.75, 27.1, 20.0))
    weights.append((1.25, 103.75, "MYS", 0.0))   # zero-weight neighbour: SGP has no own cell
    weights.append((50.25, 50.25, "SGP", 0.0))

    rows = []
    for y in years:
        for m in range(1, 13):
            season = 3.0 * np.sin(2 * np.pi * m / 12)
            for lat, lon, t0, r0 in cells:
                rows.append((lat, lon, y, m, t0 + season + rng.normal(0, 0.8) + 0.01 * (y - 1960),
                             max(0.0, r0 + rng.normal(0, 0.5))))
    grid = pd.DataFrame(rows, columns=["lat", "lon", "year", "month", "temperature_c", "precipitation_cm"])
    w = pd.DataFrame(weights, columns=["lat", "lon", "country", "weight"])
    w = w[w["country"] != "MYS"]

    econ = []
    for i, c in enumerate(codes):
        k = 30000.0 * (1 + i)
        for y in years:
            labor = 1e6 * (1 + i)
            capital = k * labor * np.exp(0.02 * (y - years[0]) + rng.normal(0, 0.05))
            output = capital ** 0.6 * labor ** 0.4 * np.exp(rng.normal(0, 0.05))
            econ.append((c, y, output, capital, labor, 2.0 * labor))
    econ = pd.DataFrame(econ, columns=["country", "year", "output", "capital", "labor", "population"])
    if not with_population:
        econ = econ.drop(columns="population")
    return grid, w, econ


@pytest.fixture(scope="session")
def raw_inputs():
    return make_raw_inputs()


@pytest.fixture(scope="session")
def raw_files(tmp_path_factory, raw_inputs):
    d = tmp_path_factory.mktemp("raw")
    grid, weights, econ = raw_inputs
    grid.to_csv(d / "grid.csv", index=False)
    weights.to_csv(d / "weights.csv", index=False)
    econ.to_csv(d / "econ.csv", index=False)
    (d / "high_income.txt").write_text("C0\nC1\n")
    return d
