# Copyright (c) the nepqn developers. All rights reserved.
# SPDX-License-Identifier: Apache-2.0
"""Smoke tests for the python bindings."""

import numpy as np
import pytest

nepqn = pytest.importorskip("nepqn")


def test_loaded_string_anchors():
    p = nepqn.loaded_string(20, 20.0)
    assert p.dimension == 20
    spectrum = nepqn.enumerate_spectrum(p)
    lams = sorted(t[0].real for t in spectrum)
    assert len(lams) == 21
    assert abs(lams[-1] - 5171.4100199276) / 5171.41 < 1e-6
    assert abs(lams[1] - 9.0684209397) / 9.07 < 1e-6


def test_pole_rejection():
    p = nepqn.loaded_string(8, 8.0)
    with pytest.raises(nepqn.NepError):
        p.evaluate(1.0)


def test_qn2_converges_on_diagonal_problem():
    a = np.diag([1.0, 3.0]).astype(complex)
    p = nepqn.linear(a)
    e1 = np.array([1.0, 0.0], dtype=complex)
    trace = nepqn.solve(p, "QN2", sigma=0.9, mu0=0.9, x0=e1, c=e1)
    assert trace["status"] == "converged"
    assert abs(trace["mu"][-1] - 1.0) < 1e-10


def test_qn4_one_step_on_linear():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    p = nepqn.linear(a)
    ones = np.ones(6, dtype=complex)
    trace = nepqn.solve(p, "QN4", sigma=0.2, mu0=0.2, x0=ones, c=ones)
    assert trace["status"] == "converged"
    assert len(trace["mu"]) == 2
    lams = np.linalg.eigvals(a)
    assert np.min(np.abs(lams - trace["mu"][-1])) < 1e-10


def test_factor_equivalence():
    p = nepqn.circle_quadratic(0.5)
    spectrum = nepqn.enumerate_spectrum(p)
    lam, v, u = min(spectrum, key=lambda t: abs(t[0] - 0.1))
    c = v + 0.1 * np.ones(10, dtype=complex)
    factors = nepqn.convergence_factors(p, 0.0, c / (np.vdot(c, c)), c, lam, v, u)
    assert factors["rho_A2"] == pytest.approx(factors["rho_B"], rel=1e-8)


def test_partial_fraction_matches_inverse():
    p = nepqn.circle_quadratic(0.5)
    z = 0.3 + 0.2j
    pf = nepqn.partial_fraction(p, z)
    minv = np.linalg.inv(p.evaluate(z))
    assert np.linalg.norm(pf - minv) < 1e-8 * np.linalg.norm(minv)
    rem = nepqn.contour_remainder(p, 0.0, 1.5, 256, z)
    assert np.linalg.norm(rem) < 1e-8
