"""Periodic homogenization with defects rare at infinity.

Python bindings over the C++ core: defect-set geometry, perturbed
coefficients, corrector and homogenized-tensor solves, the 1D closed-form
oracle, and the experiment runner.
"""

from homlab._core import (  # noqa: F401
    GeometryCertificate,
    HomlabConfigError,
    HomlabNumericalError,
    average_decay,
    cells_intersecting_ball,
    certify_geometry,
    corrector_growth_1d,
    count_in_annulus,
    default_config,
    homogenized_tensor,
    in_index_set,
    nearest_defect,
    point_of,
    potential_residuals,
    rate_study_1d,
    run_config,
    __version__,
)

__all__ = [
    "GeometryCertificate",
    "HomlabConfigError",
    "HomlabNumericalError",
    "average_decay",
    "cells_intersecting_ball",
    "certify_geometry",
    "corrector_growth_1d",
    "count_in_annulus",
    "default_config",
    "homogenized_tensor",
    "in_index_set",
    "nearest_defect",
    "point_of",
    "potential_residuals",
    "rate_study_1d",
    "run_config",
    "__version__",
]
