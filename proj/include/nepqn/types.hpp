// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nepqn
{

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

class NepError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Evaluation outside the domain of analyticity (e.g. at a pole of a rational family).
class DomainError : public NepError
{
public:
  using NepError::NepError;
};

class FactorizationError : public NepError
{
public:
  FactorizationError(const std::string &msg, double cond)
    : NepError(msg), condition_estimate(cond)
  {
  }
  double condition_estimate;
};

// Division by a (near-)zero scalar inside a step formula.
class BreakdownError : public NepError
{
public:
  using NepError::NepError;
};

// Scalar root finding (Rayleigh functional) did not converge.
class ConvergenceError : public NepError
{
public:
  ConvergenceError(const std::string &msg, Complex last)
    : NepError(msg), last_iterate(last)
  {
  }
  Complex last_iterate;
};

class UnsupportedError : public NepError
{
public:
  using NepError::NepError;
};

class ConfigError : public NepError
{
public:
  using NepError::NepError;
};

// Stacked vector [x; mu], used for iterates and error vectors of the augmented system.
struct AugmentedVector
{
  Vector vec_part;
  Complex scalar_part = 0.0;

  double norm() const
  {
    return std::sqrt(vec_part.squaredNorm() + std::norm(scalar_part));
  }
};

inline AugmentedVector operator-(const AugmentedVector &a, const AugmentedVector &b)
{
  return {a.vec_part - b.vec_part, a.scalar_part - b.scalar_part};
}

// Largest singular value.
inline double spectral_norm(const Matrix &m)
{
  if (m.size() == 0)
  {
    return 0.0;
  }
  return m.jacobiSvd().singularValues()(0);
}

}  // namespace nepqn
