"""Gamma-reflected fractional Brownian motion lab.

Exact path synthesis, reflected-process passage times, closed-form
asymptotics, Pickands/Piterbarg constant estimation, a two-parameter
Gaussian field lab, and a Monte Carlo experiment harness.
"""

from .backend import backend_name
from .fbm import Grid, ModelParams, SamplePath, fbm_cov, sample_drifted_input, sample_fbm
from .reflect import PassageRecord, passage_times, reflect, running_infimum

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "ModelParams",
    "PassageRecord",
    "SamplePath",
    "backend_name",
    "fbm_cov",
    "passage_times",
    "reflect",
    "running_infimum",
    "sample_drifted_input",
    "sample_fbm",
    "__version__",
]
