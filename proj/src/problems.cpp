// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "nepqn/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nepqn
{

namespace
{

// Multiply a scalar polynomial (ascending coefficients) by (lambda - root).
std::vector<Complex> multiply_by_linear(const std::vector<Complex> &p, Complex root)
{
  std::vector<Complex> out(p.size() + 1, 0.0);
  for (size_t i = 0; i < p.size(); ++i)
  {
    out[i] -= root * p[i];
    out[i + 1] += p[i];
  }
  return out;
}

std::vector<Complex> convolve(const std::vector<Complex> &a, const std::vector<Complex> &b)
{
  std::vector<Complex> out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
  {
    for (size_t j = 0; j < b.size(); ++j)
    {
      out[i + j] += a[i] * b[j];
    }
  }
  return out;
}

// Clear the rational terms of a structured problem by multiplying with
// prod_t (lambda - pole_t); returns the resulting matrix polynomial.
std::vector<Matrix> pole_cleared_polynomial(const NepProblem &problem)
{
  const auto *coeffs = problem.polynomial_coeffs();
  const auto *terms = problem.rational_terms();
  if (!coeffs)
  {
    throw UnsupportedError("enumerate_spectrum needs a polynomial or rational problem");
  }
  const Index n = problem.dimension();

  std::vector<Complex> prod_all = {1.0};
  for (const auto &t : *terms)
  {
    prod_all = multiply_by_linear(prod_all, t.pole);
  }

  const size_t degree = (coeffs->empty() ? 0 : coeffs->size() - 1) + terms->size();
  std::vector<Matrix> out(degree + 1, Matrix::Zero(n, n));
  for (size_t i = 0; i < coeffs->size(); ++i)
  {
    for (size_t j = 0; j < prod_all.size(); ++j)
    {
      out[i + j] += prod_all[j] * (*coeffs)[i];
    }
  }
  for (size_t t = 0; t < terms->size(); ++t)
  {
    std::vector<Complex> weight = {0.0, 1.0};  // the factor lambda
    for (size_t s = 0; s < terms->size(); ++s)
    {
      if (s != t)
      {
        weight = multiply_by_linear(weight, (*terms)[s].pole);
      }
    }
    for (size_t j = 0; j < weight.size(); ++j)
    {
      out[j] += weight[j] * (*terms)[t].coeff;
    }
  }
  while (out.size() > 1 && out.back().norm() == 0.0)
  {
    out.pop_back();
  }
  return out;
}

}  // namespace

NepProblem loaded_string(Index n, double c_scale)
{
  if (n < 2)
  {
    throw ConfigError("loaded_string needs n >= 2");
  }
  Matrix a = Matrix::Zero(n, n);
  Matrix b = Matrix::Zero(n, n);
  const double h = 1.0 / (6.0 * static_cast<double>(n));
  for (Index i = 0; i < n; ++i)
  {
    a(i, i) = 2.0 * static_cast<double>(n);
    b(i, i) = 4.0 * h;
    if (i + 1 < n)
    {
      a(i, i + 1) = a(i + 1, i) = -1.0 * static_cast<double>(n);
      b(i, i + 1) = b(i + 1, i) = h;
    }
  }
  a(n - 1, n - 1) = 1.0 * static_cast<double>(n);
  b(n - 1, n - 1) = 2.0 * h;
  Matrix c = Matrix::Zero(n, n);
  c(n - 1, n - 1) = c_scale;

  NepProblem p = NepProblem::rational({a, -b}, {{Complex(1.0), c}});
  p.with_domain_hint({Complex(2600.0), 2590.0});
  return p;
}

NepProblem circle_quadratic(double radius)
{
  if (!(radius > 0.0))
  {
    throw ConfigError("circle_quadratic needs r > 0");
  }
  constexpr Index n = 10;
  std::vector<Complex> values;
  values.push_back(Complex(0.1));
  for (int k = 0; k < 19; ++k)
  {
    values.push_back(std::polar(radius, 2.0 * std::numbers::pi * k / 19.0));
  }
  std::sort(values.begin(), values.end(), [](Complex a, Complex b) {
    return std::pair(a.real(), a.imag()) < std::pair(b.real(), b.imag());
  });

  Vector d1(n), d2(n);
  for (Index i = 0; i < n; ++i)
  {
    d1(i) = values[static_cast<size_t>(i)];
    d2(i) = values[static_cast<size_t>(i + n)];
  }
  Matrix a0 = (d1.array() * d2.array()).matrix().asDiagonal();
  Matrix a1 = (-(d1 + d2)).asDiagonal();
  Matrix a2 = Matrix::Identity(n, n);
  NepProblem p = NepProblem::polynomial({a0, a1, a2});
  p.with_domain_hint({Complex(0.0), 10.0 * std::max(radius, 0.1)});
  return p;
}

NepProblem counterexample(const std::vector<Complex> &f_coeffs)
{
  std::vector<Complex> f = f_coeffs.empty() ? std::vector<Complex>{0.0} : f_coeffs;
  // Off-diagonal entry -(lambda-1)(lambda-2) f(lambda), which makes the inverse carry
  // +f(lambda) in its (1,2) entry.
  std::vector<Complex> g = convolve({2.0, -3.0, 1.0}, f);
  for (auto &x : g)
  {
    x = -x;
  }
  const size_t degree = std::max<size_t>(1, g.size() - 1);
  std::vector<Matrix> coeffs(degree + 1, Matrix::Zero(2, 2));
  coeffs[0](0, 0) = -1.0;
  coeffs[1](0, 0) = 1.0;
  coeffs[0](1, 1) = -2.0;
  coeffs[1](1, 1) = 1.0;
  for (size_t i = 0; i < g.size(); ++i)
  {
    coeffs[i](0, 1) = g[i];
  }
  NepProblem p = NepProblem::polynomial(coeffs);
  p.with_domain_hint({Complex(1.5), 100.0});
  return p;
}

NepProblem linear(const Matrix &a)
{
  if (a.rows() != a.cols() || a.rows() == 0)
  {
    throw ConfigError("linear problem needs a square matrix");
  }
  NepProblem p = NepProblem::polynomial({a, -Matrix::Identity(a.rows(), a.cols())});
  p.with_domain_hint({Complex(0.0), 10.0 * std::max(1.0, a.norm())});
  return p;
}

Vector canonical_eigenvector(const Vector &v)
{
  Vector w = v / v.norm();
  Index imax = 0;
  w.cwiseAbs().maxCoeff(&imax);
  w *= std::abs(w(imax)) / w(imax);
  return w;
}

Eigentriplet triplet_from_eigenvalue(const NepProblem &problem, Complex lambda_guess,
                                     int refine_steps)
{
  const Index n = problem.dimension();
  Complex lambda = lambda_guess;
  for (int step = 0; step < refine_steps; ++step)
  {
    Eigen::JacobiSVD<Matrix> svd(problem.evaluate(lambda), Eigen::ComputeFullV);
    Vector v = svd.matrixV().col(n - 1);
    Matrix j = exact_jacobian(problem, lambda, v, v);
    Vector f(n + 1);
    f.head(n) = problem.evaluate(lambda) * v;
    f(n) = 0.0;  // v is unit
    Vector delta = j.partialPivLu().solve(-f);
    lambda += delta(n);
    if (std::abs(delta(n)) <= 1e-15 * (1.0 + std::abs(lambda)))
    {
      break;
    }
  }
  Eigen::JacobiSVD<Matrix> svd(problem.evaluate(lambda),
                               Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigentriplet t;
  t.lambda = lambda;
  t.right_vec = canonical_eigenvector(svd.matrixV().col(n - 1));
  t.left_vec = canonical_eigenvector(svd.matrixU().col(n - 1));
  t.normalization = Eigentriplet::Normalization::unit_norm;
  return t;
}

SpectrumReport enumerate_spectrum(const NepProblem &problem, std::optional<Disk> region)
{
  const Index n = problem.dimension();
  std::vector<Matrix> poly = pole_cleared_polynomial(problem);
  const auto degree = static_cast<Index>(poly.size()) - 1;
  if (degree < 1)
  {
    throw UnsupportedError("constant family has no eigenvalues");
  }

  Eigen::PartialPivLU<Matrix> leading(poly.back());
  if (!(leading.rcond() > 1e-14))
  {
    throw UnsupportedError("singular leading coefficient; companion linearization unsupported");
  }

  // First companion form of the monic-scaled polynomial.
  Matrix companion = Matrix::Zero(n * degree, n * degree);
  for (Index blk = 0; blk + 1 < degree; ++blk)
  {
    companion.block(blk * n, (blk + 1) * n, n, n) = Matrix::Identity(n, n);
  }
  for (Index blk = 0; blk < degree; ++blk)
  {
    companion.block((degree - 1) * n, blk * n, n, n) =
        -leading.solve(poly[static_cast<size_t>(blk)]);
  }
  Eigen::ComplexEigenSolver<Matrix> ces(companion, /*computeEigenvectors=*/false);
  if (ces.info() != Eigen::Success)
  {
    throw NepError("companion eigendecomposition failed");
  }

  const std::vector<Complex> poles = problem.poles();
  std::vector<Complex> eigenvalues;
  for (Index i = 0; i < ces.eigenvalues().size(); ++i)
  {
    const Complex lambda = ces.eigenvalues()(i);
    bool at_pole = std::any_of(poles.begin(), poles.end(), [&](Complex p) {
      return std::abs(lambda - p) <= 1e-8 * (1.0 + std::abs(p));
    });
    if (!at_pole)
    {
      eigenvalues.push_back(lambda);
    }
  }

  SpectrumReport report;
  for (Complex lambda : eigenvalues)
  {
    Eigentriplet t = triplet_from_eigenvalue(problem, lambda);
    if (region && !region->contains(t.lambda))
    {
      continue;
    }
    const Matrix m = problem.evaluate(t.lambda);
    const double scale = 1.0 + m.norm();
    if ((m * t.right_vec).norm() > 1e-6 * scale)
    {
      continue;  // spurious root introduced by pole clearing
    }
    const Complex pairing = t.left_vec.dot(problem.derivative(t.lambda) * t.right_vec);
    report.triplets.push_back(std::move(t));
    report.defective.push_back(std::abs(pairing) <
                               1e-14 * (1.0 + problem.derivative(lambda).norm()));
  }

  std::vector<size_t> order(report.triplets.size());
  for (size_t i = 0; i < order.size(); ++i)
  {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const Complex la = report.triplets[a].lambda, lb = report.triplets[b].lambda;
    return std::pair(la.real(), la.imag()) < std::pair(lb.real(), lb.imag());
  });
  SpectrumReport sorted;
  sorted.method = report.method;
  for (size_t i : order)
  {
    sorted.triplets.push_back(std::move(report.triplets[i]));
    sorted.defective.push_back(report.defective[i]);
  }
  return sorted;
}

}  // namespace nepqn
