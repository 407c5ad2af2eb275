// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "nepqn/keldysh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace nepqn
{

namespace
{

constexpr double kPoleTol = 1e-12;

Matrix dense_inverse(const NepProblem &problem, Complex z)
{
  const Index n = problem.dimension();
  Eigen::PartialPivLU<Matrix> lu(problem.evaluate(z));
  if (!(lu.rcond() > 0.0))
  {
    throw FactorizationError("M(z) is singular", std::numeric_limits<double>::infinity());
  }
  return lu.solve(Matrix::Identity(n, n));
}

}  // namespace

Complex Contour::node(int j) const
{
  return center + std::polar(radius, 2.0 * std::numbers::pi * j / node_count);
}

Complex Contour::weight(int j) const
{
  return std::polar(radius / node_count, 2.0 * std::numbers::pi * j / node_count);
}

bool Contour::strictly_inside(Complex z, double margin) const
{
  return std::abs(z - center) < radius * (1.0 - margin);
}

Matrix KeldyshDecomposition::partial_fraction(Complex z) const
{
  const Index n = problem.dimension();
  Matrix sum = Matrix::Zero(n, n);
  for (const auto &t : triplets)
  {
    if (std::abs(z - t.lambda) <= kPoleTol)
    {
      throw DomainError("partial_fraction evaluated at (or too close to) an eigenvalue");
    }
    const Complex pairing = t.left_vec.dot(problem.derivative(t.lambda) * t.right_vec);
    sum += (t.right_vec * t.left_vec.adjoint()) / ((z - t.lambda) * pairing);
  }
  return sum;
}

Matrix KeldyshDecomposition::remainder(Complex z) const
{
  if (!contour.strictly_inside(z))
  {
    throw DomainError("remainder probe must lie strictly inside the contour");
  }
  if (mode == RemainderMode::integral)
  {
    return contour_remainder(problem, contour, z);
  }
  return dense_inverse(problem, z) - partial_fraction(z);
}

Matrix partial_fraction(const KeldyshDecomposition &decomp, Complex z)
{
  return decomp.partial_fraction(z);
}

Matrix contour_remainder(const NepProblem &problem, const Contour &contour, Complex z)
{
  if (!contour.strictly_inside(z))
  {
    throw DomainError("contour_remainder probe must lie strictly inside the contour");
  }
  const Index n = problem.dimension();
  Matrix acc = Matrix::Zero(n, n);
  for (int j = 0; j < contour.node_count; ++j)
  {
    const Complex lambda = contour.node(j);
    Eigen::PartialPivLU<Matrix> lu(problem.evaluate(lambda));
    if (!(lu.rcond() > 1e-15))
    {
      throw FactorizationError(
          "M is (numerically) singular at a quadrature node; change node_count or radius",
          lu.rcond() > 0 ? 1.0 / lu.rcond() : std::numeric_limits<double>::infinity());
    }
    acc += (contour.weight(j) / (lambda - z)) * lu.solve(Matrix::Identity(n, n));
  }
  return acc;
}

KeldyshDecomposition decompose(const NepProblem &problem, Contour contour,
                               const SpectrumReport &spectrum, RemainderMode mode)
{
  // Keep quadrature nodes away from every known eigenvalue; one retry with a 1%
  // larger radius before giving up.
  for (int attempt = 0;; ++attempt)
  {
    bool collision = false;
    for (const auto &t : spectrum.triplets)
    {
      for (int j = 0; j < contour.node_count && !collision; ++j)
      {
        collision = std::abs(contour.node(j) - t.lambda) < 1e-6 * contour.radius;
      }
    }
    if (!collision)
    {
      break;
    }
    if (attempt >= 1)
    {
      throw DomainError("eigenvalue too close to a quadrature node after radius retry");
    }
    contour.radius *= 1.01;
  }

  KeldyshDecomposition decomp;
  decomp.problem = problem;
  decomp.contour = contour;
  decomp.mode = mode;
  for (size_t i = 0; i < spectrum.triplets.size(); ++i)
  {
    if (!contour.strictly_inside(spectrum.triplets[i].lambda))
    {
      continue;
    }
    if (i < spectrum.defective.size() && spectrum.defective[i])
    {
      throw UnsupportedError("decompose: enclosed eigenvalue is defective");
    }
    decomp.triplets.push_back(spectrum.triplets[i]);
  }
  return decomp;
}

std::vector<RemainderDecayRow> remainder_decay(const NepProblem &problem, Complex center,
                                               const std::vector<double> &radii,
                                               const std::vector<Complex> &probes,
                                               int node_count)
{
  const std::vector<Complex> poles = problem.poles();
  std::vector<RemainderDecayRow> table;
  for (double r : radii)
  {
    Contour contour{center, r, node_count};
    RemainderDecayRow row;
    row.radius = r;

    bool pole_on_contour =
        std::any_of(poles.begin(), poles.end(), [&](Complex p) {
          return std::abs(std::abs(p - center) - r) < 1e-8 * (1.0 + r);
        });
    if (pole_on_contour)
    {
      row.skipped = true;
      row.note = "pole of the rational family on the contour";
      table.push_back(std::move(row));
      continue;
    }

    try
    {
      for (int j = 0; j < node_count; ++j)
      {
        row.max_inv_norm =
            std::max(row.max_inv_norm, spectral_norm(dense_inverse(problem, contour.node(j))));
      }
      for (Complex z : probes)
      {
        row.remainder_norms.push_back(
            contour.strictly_inside(z)
                ? spectral_norm(contour_remainder(problem, contour, z))
                : std::numeric_limits<double>::quiet_NaN());
      }
    }
    catch (const NepError &e)
    {
      row.skipped = true;
      row.note = e.what();
      row.remainder_norms.clear();
    }
    table.push_back(std::move(row));
  }
  return table;
}

}  // namespace nepqn
