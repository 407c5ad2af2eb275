// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "nepqn/problems.hpp"
#include "nepqn/solvers.hpp"

namespace nepqn
{

enum class ConvergenceMatrixKind
{
  a1,  // (n+1) x (n+1) first-order error map of QN1
  a2,  // (n+1) x (n+1) first-order error map of QN2 (last column zero)
  b,   // n x n map sharing the nonzero spectrum of a2 (QN3 / residual inverse iteration)
};

struct ConvergenceMatrix
{
  ConvergenceMatrixKind kind;
  Matrix matrix;
  Complex sigma;
  Vector c;
  Eigentriplet target;

  double spectral_radius() const;
};

// First-order error map of QN1 around the target pair, with q0, alpha0 built from x0.
ConvergenceMatrix matrix_a1(const NepProblem &problem, Complex sigma, const Vector &x0,
                            const Vector &c, const Eigentriplet &target);

ConvergenceMatrix matrix_a2(const NepProblem &problem, Complex sigma, const Vector &c,
                            const Eigentriplet &target);

// B = (I - v c^H) M(sigma)^{-1} [M(sigma) - M(lambda)
//      + M'(lambda) v w_sigma^H M(lambda) / (w_sigma^H M'(lambda) v)].
ConvergenceMatrix matrix_b(const NepProblem &problem, Complex sigma, const Vector &c,
                           const Eigentriplet &target);

double spectral_radius(const Matrix &m);

// rho_k = ||w_k - w_*|| / ||w_{k-1} - w_*|| per iteration; entries are NaN where no
// valid ratio exists (k = 0 or denominator below the 1e-13 round-off floor).
std::vector<double> estimated_factors(const IterationTrace &trace, const Eigentriplet &reference);

struct ConditionReport
{
  std::vector<double> kappa;           // ||u|| ||v|| / |u^H M'(lambda) v|
  std::vector<bool> defective;
  std::vector<double> shift_distance;  // |sigma - lambda_i|, empty when no shift given
};

ConditionReport condition_numbers(const NepProblem &problem, const SpectrumReport &spectrum,
                                  std::optional<Complex> sigma = {});

// Upper bound on rho(A2) = rho(B) from the Keldysh expansion over the given spectrum:
// ||P1|| * ||M(lambda_1) - M(sigma) + M'(lambda_1) v1 w^H M(lambda_1) / (w^H M'(lambda_1) v1)||
//   * (sum_{i != target} kappa_i / |sigma - lambda_i| + remainder_norm).
double clustering_bound(const NepProblem &problem, Complex sigma, const Vector &c,
                        const SpectrumReport &spectrum, Index target, double remainder_norm);

// Eigenvalues with modulus above rel_threshold * ||m||.
std::vector<Complex> nonzero_eigenvalues(const Matrix &m, double rel_threshold = 1e-10);

// Nonzero spectrum of a convergence matrix. For A2 this reduces to the (1,1) block,
// whose zero eigenvalue is simple; the full matrix pairs it with the structurally zero
// last column into a defective double zero that floating point smears to ~sqrt(eps).
std::vector<Complex> nonzero_factor_spectrum(const ConvergenceMatrix &m,
                                             double rel_threshold = 1e-10);

// Greedy minimal-distance pairing; true when the multisets agree to rel_tol relative
// to the largest participating modulus.
bool multiset_match(std::vector<Complex> a, std::vector<Complex> b, double rel_tol);

}  // namespace nepqn
