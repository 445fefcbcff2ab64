"""Numerical toolkit for time-fractional stochastic diffusion.

Fractional calculus on uniform time grids, Mittag-Leffler kernel symbols,
spectral solvers for the mild stochastic-convolution formula on the torus,
and empirical verifiers for the regularity estimates the solution theory
predicts.
"""

__version__ = "0.1.0"

from .mittag_leffler import (
    BoundReport,
    MLAccuracyError,
    MLParams,
    ml_bound_check,
    ml_eval,
    ml_eval_array,
)

__all__ = [
    "__version__",
    "BoundReport",
    "MLAccuracyError",
    "MLParams",
    "ml_bound_check",
    "ml_eval",
    "ml_eval_array",
]
