// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "nepqn/core.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace nepqn
{

namespace
{

constexpr double kPoleGuard = 1e-12;
constexpr double kDividedDiffSwitch = 1e-12;

// j-th derivative of lambda/(lambda - p): the term equals 1 + p/(lambda - p), so for
// j >= 1 the derivative is p * (-1)^j * j! / (lambda - p)^(j+1).
Complex rational_weight_derivative(int order, Complex lambda, Complex pole)
{
  if (order == 0)
  {
    return lambda / (lambda - pole);
  }
  double factorial = 1.0;
  for (int j = 2; j <= order; ++j)
  {
    factorial *= j;
  }
  double sign = (order % 2 == 0) ? 1.0 : -1.0;
  return pole * sign * factorial / std::pow(lambda - pole, order + 1);
}

}  // namespace

struct NepProblem::Impl
{
  Index n = 0;

  // Structured representation (empty coeffs means callback-backed).
  std::vector<Matrix> coeffs;
  std::vector<RationalTerm> terms;

  EvalFn eval;
  EvalFn deriv;
  HigherFn higher;

  bool structured() const { return !coeffs.empty() || !terms.empty(); }

  void check_poles(Complex lambda) const
  {
    for (const auto &term : terms)
    {
      if (std::abs(lambda - term.pole) <= kPoleGuard * (1.0 + std::abs(term.pole)))
      {
        throw DomainError("evaluation at (or too close to) the pole of a rational term");
      }
    }
  }

  Matrix evaluate(Complex lambda) const
  {
    if (!structured())
    {
      return eval(lambda);
    }
    check_poles(lambda);
    Matrix m = Matrix::Zero(n, n);
    for (auto i = static_cast<Index>(coeffs.size()); i-- > 0;)
    {
      m = (m * lambda + coeffs[static_cast<size_t>(i)]).eval();
    }
    for (const auto &term : terms)
    {
      m += (lambda / (lambda - term.pole)) * term.coeff;
    }
    return m;
  }

  Matrix derivative_impl(int order, Complex lambda) const
  {
    if (!structured())
    {
      if (order == 1)
      {
        return deriv(lambda);
      }
      if (!higher)
      {
        throw UnsupportedError("problem does not provide higher derivatives");
      }
      return higher(order, lambda);
    }
    check_poles(lambda);
    Matrix m = Matrix::Zero(n, n);
    const auto N = static_cast<int>(coeffs.size()) - 1;
    for (int i = N; i >= order; --i)
    {
      double scale = 1.0;
      for (int j = 0; j < order; ++j)
      {
        scale *= i - j;
      }
      m = (m * lambda + scale * coeffs[static_cast<size_t>(i)]).eval();
    }
    for (const auto &term : terms)
    {
      m += rational_weight_derivative(order, lambda, term.pole) * term.coeff;
    }
    return m;
  }
};

NepProblem NepProblem::polynomial(std::vector<Matrix> coeffs)
{
  return rational(std::move(coeffs), {});
}

NepProblem NepProblem::rational(std::vector<Matrix> poly_coeffs, std::vector<RationalTerm> terms)
{
  if (poly_coeffs.empty() && terms.empty())
  {
    throw ConfigError("a structured problem needs at least one coefficient matrix");
  }
  auto impl = std::make_shared<Impl>();
  impl->n = poly_coeffs.empty() ? terms.front().coeff.rows() : poly_coeffs.front().rows();
  for (const auto &a : poly_coeffs)
  {
    if (a.rows() != impl->n || a.cols() != impl->n)
    {
      throw ConfigError("coefficient matrices must be square and of equal size");
    }
  }
  for (const auto &t : terms)
  {
    if (t.coeff.rows() != impl->n || t.coeff.cols() != impl->n)
    {
      throw ConfigError("rational term matrices must match the problem dimension");
    }
  }
  impl->coeffs = std::move(poly_coeffs);
  impl->terms = std::move(terms);
  NepProblem p;
  p.impl_ = std::move(impl);
  return p;
}

NepProblem NepProblem::from_callbacks(Index n, EvalFn eval, EvalFn deriv, HigherFn higher)
{
  auto impl = std::make_shared<Impl>();
  impl->n = n;
  impl->eval = std::move(eval);
  impl->deriv = std::move(deriv);
  impl->higher = std::move(higher);
  NepProblem p;
  p.impl_ = std::move(impl);
  return p;
}

Index NepProblem::dimension() const
{
  return impl_ ? impl_->n : 0;
}

Matrix NepProblem::evaluate(Complex lambda) const
{
  return impl_->evaluate(lambda);
}

Matrix NepProblem::derivative(Complex lambda) const
{
  return impl_->derivative_impl(1, lambda);
}

bool NepProblem::has_higher_derivatives() const
{
  return impl_ && (impl_->structured() || static_cast<bool>(impl_->higher));
}

Matrix NepProblem::higher_derivative(int order, Complex lambda) const
{
  if (order < 2)
  {
    throw ConfigError("higher_derivative expects order >= 2");
  }
  return impl_->derivative_impl(order, lambda);
}

const std::vector<Matrix> *NepProblem::polynomial_coeffs() const
{
  return (impl_ && impl_->structured()) ? &impl_->coeffs : nullptr;
}

const std::vector<NepProblem::RationalTerm> *NepProblem::rational_terms() const
{
  return (impl_ && impl_->structured()) ? &impl_->terms : nullptr;
}

std::vector<Complex> NepProblem::poles() const
{
  std::vector<Complex> out;
  if (impl_)
  {
    for (const auto &t : impl_->terms)
    {
      out.push_back(t.pole);
    }
  }
  return out;
}

NepProblem &NepProblem::with_domain_hint(DomainHint hint)
{
  hint_ = hint;
  return *this;
}

const std::optional<DomainHint> &NepProblem::domain_hint() const
{
  return hint_;
}

Matrix divided_difference(const NepProblem &problem, Complex lambda, Complex mu)
{
  if (std::abs(lambda - mu) <= kDividedDiffSwitch * (1.0 + std::abs(lambda)))
  {
    return problem.derivative(lambda);
  }
  return (problem.evaluate(lambda) - problem.evaluate(mu)) / (lambda - mu);
}

AugmentedVector augmented_residual(const NepProblem &problem, Complex mu, const Vector &x,
                                   const Vector &c)
{
  if (x.size() != problem.dimension() || c.size() != problem.dimension())
  {
    throw ConfigError("augmented_residual: dimension mismatch");
  }
  return {problem.evaluate(mu) * x, c.dot(x) - 1.0};
}

Matrix exact_jacobian(const NepProblem &problem, Complex mu, const Vector &x, const Vector &c)
{
  const Index n = problem.dimension();
  if (x.size() != n || c.size() != n)
  {
    throw ConfigError("exact_jacobian: dimension mismatch");
  }
  Matrix j = Matrix::Zero(n + 1, n + 1);
  j.topLeftCorner(n, n) = problem.evaluate(mu);
  j.topRightCorner(n, 1) = problem.derivative(mu) * x;
  j.bottomLeftCorner(1, n) = c.adjoint();
  return j;
}

ShiftFactorization::ShiftFactorization(const NepProblem &problem, Complex shift)
  : shift_(shift), lu_(problem.evaluate(shift))
{
  const double rcond = lu_.rcond();
  cond_ = (rcond > 0.0) ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(cond_ < 1e16))
  {
    throw FactorizationError("M(sigma) is singular or numerically singular", cond_);
  }
}

Vector ShiftFactorization::solve(const Vector &b) const
{
  return lu_.solve(b);
}

Vector ShiftFactorization::adjoint_solve(const Vector &d) const
{
  return lu_.adjoint().solve(d);
}

Matrix ShiftFactorization::solve_matrix(const Matrix &b) const
{
  return lu_.solve(b);
}

}  // namespace nepqn
