# Copyright (c) the nepqn developers. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
"""Quasi-Newton solvers and Keldysh diagnostics for nonlinear eigenvalue problems."""

try:
    from ._nepqn import (
        Eigentriplet,
        NepError,
        NepProblem,
        circle_quadratic,
        contour_remainder,
        convergence_factors,
        counterexample,
        enumerate_spectrum,
        linear,
        loaded_string,
        partial_fraction,
        polynomial,
        solve,
        spectral_radius,
    )
except ImportError:  # in-tree builds keep the extension next to the package
    from _nepqn import (
        Eigentriplet,
        NepError,
        NepProblem,
        circle_quadratic,
        contour_remainder,
        convergence_factors,
        counterexample,
        enumerate_spectrum,
        linear,
        loaded_string,
        partial_fraction,
        polynomial,
        solve,
        spectral_radius,
    )

__all__ = [
    "Eigentriplet",
    "NepError",
    "NepProblem",
    "circle_quadratic",
    "contour_remainder",
    "convergence_factors",
    "counterexample",
    "enumerate_spectrum",
    "linear",
    "loaded_string",
    "partial_fraction",
    "polynomial",
    "solve",
    "spectral_radius",
]
