// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "nepqn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nepqn
{

namespace
{

constexpr double kBreakdownTol = 1e-14;

// Target right vector rescaled to c^H v = 1.
Vector c_normalized(const Vector &v, const Vector &c)
{
  const Complex cv = c.dot(v);
  if (std::abs(cv) < kBreakdownTol * v.norm())
  {
    throw BreakdownError("target eigenvector is (numerically) orthogonal to c");
  }
  return v / cv;
}

}  // namespace

double ConvergenceMatrix::spectral_radius() const
{
  return nepqn::spectral_radius(matrix);
}

double spectral_radius(const Matrix &m)
{
  if (m.rows() != m.cols())
  {
    throw ConfigError("spectral_radius needs a square matrix");
  }
  Eigen::ComplexEigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

ConvergenceMatrix matrix_a1(const NepProblem &problem, Complex sigma, const Vector &x0,
                            const Vector &c, const Eigentriplet &target)
{
  const Index n = problem.dimension();
  const Vector v = c_normalized(target.right_vec, c);
  const Complex lambda = target.lambda;
  ShiftFactorization fact(problem, sigma);

  const Vector q0 = fact.solve(problem.derivative(sigma) * x0);
  const Complex cq0 = c.dot(q0);
  if (std::abs(cq0) < kBreakdownTol)
  {
    throw BreakdownError("matrix_a1: |c^H q0| below breakdown tolerance");
  }
  const Complex alpha0 = 1.0 / cq0;

  // Blocks of J1~^{-1} (J1~ - J_*) via the Schur complement of J1~. Note the (1,2)
  // difference block is M'(sigma) x0 - M'(lambda) v, whose M'(sigma) x0 part is
  // annihilated by the projector rows.
  const Matrix d = problem.evaluate(sigma) - problem.evaluate(lambda);
  const Vector e = problem.derivative(sigma) * x0 - problem.derivative(lambda) * v;

  const Matrix minv_d = fact.solve_matrix(d);
  const Vector minv_e = fact.solve(e);
  Matrix a = Matrix::Zero(n + 1, n + 1);
  a.topLeftCorner(n, n) = minv_d - alpha0 * q0 * (c.adjoint() * minv_d);
  a.topRightCorner(n, 1) = minv_e - alpha0 * q0 * c.dot(minv_e);
  a.bottomLeftCorner(1, n) = alpha0 * (c.adjoint() * minv_d);
  a(n, n) = alpha0 * c.dot(minv_e);
  return {ConvergenceMatrixKind::a1, std::move(a), sigma, c, target};
}

ConvergenceMatrix matrix_a2(const NepProblem &problem, Complex sigma, const Vector &c,
                            const Eigentriplet &target)
{
  const Index n = problem.dimension();
  const Vector v = c_normalized(target.right_vec, c);
  const Complex lambda = target.lambda;
  ShiftFactorization fact(problem, sigma);

  const Vector w_sigma = fact.adjoint_solve(c);
  const Vector mpv = problem.derivative(lambda) * v;
  const Complex denom = w_sigma.dot(mpv);
  if (std::abs(denom) < kBreakdownTol)
  {
    throw BreakdownError("matrix_a2: |w_sigma^H M'(lambda) v| below breakdown tolerance");
  }
  const Complex alpha = 1.0 / denom;
  const Vector q = fact.solve(mpv);

  const Matrix d = problem.evaluate(sigma) - problem.evaluate(lambda);
  const Matrix minv_d = fact.solve_matrix(d);
  Matrix a = Matrix::Zero(n + 1, n + 1);
  a.topLeftCorner(n, n) = minv_d - alpha * q * (c.adjoint() * minv_d);
  a.bottomLeftCorner(1, n) = alpha * (c.adjoint() * minv_d);
  return {ConvergenceMatrixKind::a2, std::move(a), sigma, c, target};
}

ConvergenceMatrix matrix_b(const NepProblem &problem, Complex sigma, const Vector &c,
                           const Eigentriplet &target)
{
  const Index n = problem.dimension();
  const Vector v = c_normalized(target.right_vec, c);
  const Complex lambda = target.lambda;
  ShiftFactorization fact(problem, sigma);

  const Vector w_sigma = fact.adjoint_solve(c);
  const Matrix m_lambda = problem.evaluate(lambda);
  const Vector mpv = problem.derivative(lambda) * v;
  const Complex denom = w_sigma.dot(mpv);
  if (std::abs(denom) < kBreakdownTol)
  {
    throw BreakdownError("matrix_b: |w_sigma^H M'(lambda) v| below breakdown tolerance");
  }

  const Matrix inner = (problem.evaluate(sigma) - m_lambda) +
                       (1.0 / denom) * mpv * (w_sigma.adjoint() * m_lambda);
  const Matrix minv_inner = fact.solve_matrix(inner);
  Matrix b = minv_inner - v * (c.adjoint() * minv_inner);
  return {ConvergenceMatrixKind::b, std::move(b), sigma, c, target};
}

std::vector<double> estimated_factors(const IterationTrace &trace, const Eigentriplet &reference)
{
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> out(trace.records.size(), nan);
  if (trace.records.empty())
  {
    return out;
  }
  const Complex cv = trace.c.dot(reference.right_vec);
  if (std::abs(cv) < kBreakdownTol * reference.right_vec.norm())
  {
    return out;
  }
  const Vector v = reference.right_vec / cv;
  std::vector<double> err(trace.records.size());
  for (size_t k = 0; k < trace.records.size(); ++k)
  {
    err[k] = AugmentedVector{trace.records[k].x - v, trace.records[k].mu - reference.lambda}
                 .norm();
  }
  for (size_t k = 1; k < err.size(); ++k)
  {
    if (err[k - 1] >= 1e-13)
    {
      out[k] = err[k] / err[k - 1];
    }
  }
  return out;
}

ConditionReport condition_numbers(const NepProblem &problem, const SpectrumReport &spectrum,
                                  std::optional<Complex> sigma)
{
  ConditionReport report;
  for (const auto &t : spectrum.triplets)
  {
    const Vector u = t.left_vec / t.left_vec.norm();
    const Vector v = t.right_vec / t.right_vec.norm();
    const Matrix mp = problem.derivative(t.lambda);
    const Complex pairing = u.dot(mp * v);
    const bool defective = std::abs(pairing) < kBreakdownTol * (1.0 + mp.norm());
    report.defective.push_back(defective);
    report.kappa.push_back(defective ? std::numeric_limits<double>::infinity()
                                     : 1.0 / std::abs(pairing));
    if (sigma)
    {
      report.shift_distance.push_back(std::abs(*sigma - t.lambda));
    }
  }
  return report;
}

double clustering_bound(const NepProblem &problem, Complex sigma, const Vector &c,
                        const SpectrumReport &spectrum, Index target, double remainder_norm)
{
  if (target < 0 || target >= static_cast<Index>(spectrum.triplets.size()))
  {
    throw ConfigError("clustering_bound: target index out of range");
  }
  const auto &t1 = spectrum.triplets[static_cast<size_t>(target)];
  const Vector v1 = c_normalized(t1.right_vec, c);
  ShiftFactorization fact(problem, sigma);
  const Vector w_sigma = fact.adjoint_solve(c);

  const Matrix m1 = problem.evaluate(t1.lambda);
  const Vector mpv = problem.derivative(t1.lambda) * v1;
  const Complex denom = w_sigma.dot(mpv);
  if (std::abs(denom) < kBreakdownTol)
  {
    throw BreakdownError("clustering_bound: |w_sigma^H M'(lambda) v| below tolerance");
  }
  const Matrix bracket =
      m1 - problem.evaluate(sigma) + (1.0 / denom) * mpv * (w_sigma.adjoint() * m1);

  const Index n = problem.dimension();
  const Matrix p1 = Matrix::Identity(n, n) - v1 * c.adjoint();

  const ConditionReport cond = condition_numbers(problem, spectrum, sigma);
  double sum = remainder_norm;
  for (size_t i = 0; i < spectrum.triplets.size(); ++i)
  {
    if (static_cast<Index>(i) == target)
    {
      continue;
    }
    sum += cond.kappa[i] / std::abs(sigma - spectrum.triplets[i].lambda);
  }
  return spectral_norm(p1) * spectral_norm(bracket) * sum;
}

std::vector<Complex> nonzero_factor_spectrum(const ConvergenceMatrix &m, double rel_threshold)
{
  if (m.kind == ConvergenceMatrixKind::a2)
  {
    const Index n = m.matrix.rows() - 1;
    return nonzero_eigenvalues(m.matrix.topLeftCorner(n, n), rel_threshold);
  }
  return nonzero_eigenvalues(m.matrix, rel_threshold);
}

std::vector<Complex> nonzero_eigenvalues(const Matrix &m, double rel_threshold)
{
  Eigen::ComplexEigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  const double threshold = rel_threshold * std::max(m.norm(), 1e-300);
  std::vector<Complex> out;
  for (Index i = 0; i < es.eigenvalues().size(); ++i)
  {
    if (std::abs(es.eigenvalues()(i)) > threshold)
    {
      out.push_back(es.eigenvalues()(i));
    }
  }
  return out;
}

bool multiset_match(std::vector<Complex> a, std::vector<Complex> b, double rel_tol)
{
  if (a.size() != b.size())
  {
    return false;
  }
  double scale = 0.0;
  for (Complex z : a)
  {
    scale = std::max(scale, std::abs(z));
  }
  for (Complex z : b)
  {
    scale = std::max(scale, std::abs(z));
  }
  while (!a.empty())
  {
    size_t bi = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < b.size(); ++j)
    {
      const double d = std::abs(a.back() - b[j]);
      if (d < bd)
      {
        bd = d;
        bi = j;
      }
    }
    if (bd > rel_tol * scale)
    {
      return false;
    }
    a.pop_back();
    b.erase(b.begin() + static_cast<std::ptrdiff_t>(bi));
  }
  return true;
}

}  // namespace nepqn
