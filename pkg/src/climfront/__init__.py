"""Climate effects on output through a stochastic production frontier.

Modules
-------
dataio
    Gridded weather to country-year panels: normals, anomalies, dummies.
modelspec
    Model specifications, named presets and design matrices.
sfa
    Maximum-likelihood frontier estimation with heteroskedastic inefficiency.
ecm
    Two-stage error-correction estimation.
urtests
    Dickey-Fuller and Im-Pesaran-Shin unit-root tests.
scenario
    Climate-change impact projections.
recovery
    Monte Carlo parameter-recovery studies.
cli
    Command-line front end.
"""
__version__ = "0.1.0"

from .errors import ClimFrontError, DataError, NumericError  # noqa: E402
from .modelspec import ModelSpec, build_design, preset  # noqa: E402
from .sfa import FitResult, fit, simulate_panel  # noqa: E402

__all__ = ["ClimFrontError", "DataError", "NumericError", "ModelSpec", "build_design", "preset",
           "FitResult", "fit", "simulate_panel", "__version__"]
