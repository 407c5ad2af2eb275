// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "nepqn/types.hpp"

namespace nepqn
{

// Disk in the complex plane on which a problem is known to be analytic.
struct DomainHint
{
  Complex center;
  double radius;
};

// A holomorphic matrix family M(lambda) together with its derivative. Families are
// either structured (matrix polynomial, possibly with rational terms lambda/(lambda-p)*C)
// or wrap user callbacks. Instances are immutable and cheap to copy.
class NepProblem
{
public:
  struct RationalTerm
  {
    Complex pole;
    Matrix coeff;  // contributes lambda/(lambda - pole) * coeff
  };

  using EvalFn = std::function<Matrix(Complex)>;
  using HigherFn = std::function<Matrix(int, Complex)>;

  NepProblem() = default;

  // M(lambda) = sum_i coeffs[i] * lambda^i.
  static NepProblem polynomial(std::vector<Matrix> coeffs);

  // M(lambda) = sum_i coeffs[i] * lambda^i + sum_t lambda/(lambda - pole_t) * C_t.
  static NepProblem rational(std::vector<Matrix> poly_coeffs, std::vector<RationalTerm> terms);

  // Wrap user callbacks; higher derivatives are optional and only needed by diagnostics.
  static NepProblem from_callbacks(Index n, EvalFn eval, EvalFn deriv, HigherFn higher = {});

  Index dimension() const;
  Matrix evaluate(Complex lambda) const;
  Matrix derivative(Complex lambda) const;

  bool has_higher_derivatives() const;
  Matrix higher_derivative(int order, Complex lambda) const;  // order >= 2

  // Structure access; nullptr for callback-backed problems.
  const std::vector<Matrix> *polynomial_coeffs() const;
  const std::vector<RationalTerm> *rational_terms() const;
  std::vector<Complex> poles() const;

  NepProblem &with_domain_hint(DomainHint hint);
  const std::optional<DomainHint> &domain_hint() const;

private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  std::optional<DomainHint> hint_;
};

struct Eigentriplet
{
  enum class Normalization
  {
    unit_norm,     // ||v|| = ||u|| = 1
    c_normalized,  // c^H v = 1
  };

  Complex lambda;
  Vector right_vec;
  Vector left_vec;
  Normalization normalization = Normalization::unit_norm;
};

// Divided difference M[lambda, mu]; falls back to M'(lambda) when the arguments
// (nearly) coincide to avoid catastrophic cancellation.
Matrix divided_difference(const NepProblem &problem, Complex lambda, Complex mu);

// F([x; mu]) = [M(mu) x; c^H x - 1].
AugmentedVector augmented_residual(const NepProblem &problem, Complex mu, const Vector &x,
                                   const Vector &c);

// (n+1) x (n+1) Jacobian of the augmented residual: [[M(mu), M'(mu) x], [c^H, 0]].
Matrix exact_jacobian(const NepProblem &problem, Complex mu, const Vector &x, const Vector &c);

// LU factorization of M(sigma), reused for all solves against the shifted matrix.
class ShiftFactorization
{
public:
  ShiftFactorization(const NepProblem &problem, Complex shift);

  Complex shift() const { return shift_; }
  Vector solve(const Vector &b) const;          // M(sigma) x = b
  Vector adjoint_solve(const Vector &d) const;  // M(sigma)^H y = d
  Matrix solve_matrix(const Matrix &b) const;   // columnwise solve

  double condition_estimate() const { return cond_; }
  bool ill_conditioned() const { return cond_ > 1e14; }

private:
  Complex shift_;
  Eigen::PartialPivLU<Matrix> lu_;
  double cond_ = 0.0;
};

inline ShiftFactorization factorize(const NepProblem &problem, Complex sigma)
{
  return ShiftFactorization(problem, sigma);
}

}  // namespace nepqn
