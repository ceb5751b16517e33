"""Functional singular value decomposition of bivariate samples.

Thin re-export of the compiled extension module.
"""

from ._fsvd import (
    DataError,
    Decomposition,
    NumericalError,
    SplineBasis,
    fit,
    run_study,
    trapezoid_weights,
    true_mean,
)

__all__ = [
    "DataError",
    "Decomposition",
    "NumericalError",
    "SplineBasis",
    "fit",
    "run_study",
    "trapezoid_weights",
    "true_mean",
]
