// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nepqn/core.hpp"

namespace nepqn
{

// NLEVP 'loaded_string': M(lambda) = A - lambda B + lambda/(lambda - 1) * c_scale * C
// with A = n*tridiag(-1,2,-1) (last diagonal entry n), B = 1/(6n)*tridiag(1,4,1)
// (last diagonal entry 2/(6n)) and C = e_n e_n^T.
NepProblem loaded_string(Index n, double c_scale);

// Quadratic family lambda^2 I - lambda (A1 + A2) + A1 A2 with diagonal 10x10 factors
// whose union of diagonals is {0.1} plus 19 equally spaced points on the radius-r
// circle around the origin. Values are sorted by (re, im); the first ten go to A1.
NepProblem circle_quadratic(double radius);

// 2x2 family with eigenvalues {1, 2} and a non-vanishing Keldysh remainder carrying
// the scalar polynomial f. Built so that M(z)^{-1} = [[1/(z-1), f(z)], [0, 1/(z-2)]].
NepProblem counterexample(const std::vector<Complex> &f_coeffs);

// M(lambda) = A - lambda I.
NepProblem linear(const Matrix &a);

struct Disk
{
  Complex center;
  double radius;

  bool contains(Complex z) const { return std::abs(z - center) < radius; }
};

struct SpectrumReport
{
  std::vector<Eigentriplet> triplets;  // sorted by (re, im), unit-norm vectors
  std::vector<bool> defective;         // |u^H M'(lambda) v| below tolerance
  std::string method = "linearization";
};

// All finite eigenvalues of a polynomial (or pole-cleared rational) family with left and
// right eigenvectors, via companion linearization of the monic-scaled polynomial. Each
// triplet is refined by a Newton step on the augmented system and residual-checked.
SpectrumReport enumerate_spectrum(const NepProblem &problem, std::optional<Disk> region = {});

// Eigentriplet at an isolated eigenvalue from an initial guess (SVD null vectors plus
// Newton steps on the augmented system, stopping early once lambda stops moving).
Eigentriplet triplet_from_eigenvalue(const NepProblem &problem, Complex lambda_guess,
                                     int refine_steps = 8);

// Unit norm with the largest-modulus entry rotated to the positive real axis, so that
// eigenvector-dependent experiment setups are reproducible.
Vector canonical_eigenvector(const Vector &v);

}  // namespace nepqn
