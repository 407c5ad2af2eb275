// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "test_support.hpp"

using namespace nepqn;

namespace
{

Matrix diag2(double a, double b)
{
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

Vector unit(Index n, Index i)
{
  Vector v = Vector::Zero(n);
  v(i) = 1.0;
  return v;
}

Eigentriplet diag_triplet(double lambda, Index n, Index i)
{
  Eigentriplet t;
  t.lambda = lambda;
  t.right_vec = unit(n, i);
  t.left_vec = unit(n, i);
  return t;
}

// Dense fixed-point form I - J~(v, lambda)^{-1} J_*(v, lambda) with the QN1 Jacobian.
Matrix a1_fixed_point(const NepProblem &p, Complex sigma, const Vector &x0, const Vector &c,
                      const Eigentriplet &target)
{
  const Index n = p.dimension();
  const Vector v = target.right_vec / c.dot(target.right_vec);
  Matrix jt = Matrix::Zero(n + 1, n + 1);
  jt.topLeftCorner(n, n) = p.evaluate(sigma);
  jt.topRightCorner(n, 1) = p.derivative(sigma) * x0;
  jt.bottomLeftCorner(1, n) = c.adjoint();
  const Matrix jstar = exact_jacobian(p, target.lambda, v, c);
  return Matrix::Identity(n + 1, n + 1) - jt.partialPivLu().solve(jstar);
}

}  // namespace

TEST_CASE("spectral radius")
{
  CHECK(spectral_radius(Matrix::Identity(4, 4)) == doctest::Approx(1.0));
  CHECK(spectral_radius(diag2(2.0, -3.0)) == doctest::Approx(3.0));

  DeterministicRng rng(17);
  const Matrix m = rng.complex_matrix(5, 5);
  // Schur diagonal as an independent route to the eigenvalues.
  Eigen::ComplexSchur<Matrix> schur(m);
  const double expected = schur.matrixT().diagonal().cwiseAbs().maxCoeff();
  CHECK(spectral_radius(m) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("factor matrices on diag(1,3) with sigma = 0.9")
{
  const NepProblem p = linear(diag2(1.0, 3.0));
  const Vector e1 = unit(2, 0);
  const Eigentriplet target = diag_triplet(1.0, 2, 0);
  const double expected = 0.1 / 2.1;

  const ConvergenceMatrix a1 = matrix_a1(p, Complex(0.9), e1, e1, target);
  const ConvergenceMatrix a2 = matrix_a2(p, Complex(0.9), e1, target);
  const ConvergenceMatrix b = matrix_b(p, Complex(0.9), e1, target);

  CHECK(a1.spectral_radius() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(a2.spectral_radius() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(b.spectral_radius() == doctest::Approx(expected).epsilon(1e-12));

  // B is exactly diag(0, 0.1/2.1) here.
  CHECK(std::abs(b.matrix(0, 0)) <= 1e-15);
  CHECK(std::abs(b.matrix(1, 1) - expected) <= 1e-15);

  // x0 = v makes A1 and A2 coincide.
  CHECK((a1.matrix - a2.matrix).norm() <= 1e-13);
}

TEST_CASE("A2 has an exactly zero last column")
{
  const NepProblem ls = loaded_string(20, 20.0);
  const SpectrumReport spectrum = enumerate_spectrum(ls);
  const Eigentriplet &target = spectrum.triplets.back();
  const Vector c = canonical_eigenvector(target.right_vec) + 0.05 * Vector::Ones(20);
  const ConvergenceMatrix a2 = matrix_a2(ls, target.lambda + 5.0, c, target);
  CHECK(a2.matrix.col(20).norm() == 0.0);
}

TEST_CASE("A1 equals the dense fixed-point Jacobian")
{
  const NepProblem ls = loaded_string(20, 20.0);
  const SpectrumReport spectrum = enumerate_spectrum(ls);
  const Eigentriplet &target = spectrum.triplets.back();
  const Vector x0 = canonical_eigenvector(target.right_vec) + 0.05 * Vector::Ones(20);
  const Vector c = x0;
  const Vector x0n = x0 / c.dot(x0);
  const Complex sigma = target.lambda + 5.0;

  const ConvergenceMatrix a1 = matrix_a1(ls, sigma, x0n, c, target);
  const Matrix dense = a1_fixed_point(ls, sigma, x0n, c, target);
  CHECK((a1.matrix - dense).norm() <= 1e-10 * (1.0 + dense.norm()));
}

TEST_CASE("nonzero spectra of A2 and B coincide")
{
  SUBCASE("random small problems")
  {
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
    {
      CAPTURE(seed);
      const NepProblem p = test::random_linear_problem(5, seed * 11);
      const SpectrumReport spectrum = enumerate_spectrum(p);
      DeterministicRng rng(seed);
      const Vector c = rng.complex_vector(5);
      const Eigentriplet &target = spectrum.triplets[seed % spectrum.triplets.size()];
      double gap = 1e300;
      for (const auto &t : spectrum.triplets)
      {
        if (std::abs(t.lambda - target.lambda) > 1e-12)
        {
          gap = std::min(gap, std::abs(t.lambda - target.lambda));
        }
      }
      const Complex sigma = target.lambda + 0.25 * gap * (1.0 + 0.3 * rng.uniform());

      const ConvergenceMatrix a2 = matrix_a2(p, sigma, c, target);
      const ConvergenceMatrix b = matrix_b(p, sigma, c, target);
      CHECK(multiset_match(nonzero_factor_spectrum(a2), nonzero_factor_spectrum(b), 1e-8));
      CHECK(a2.spectral_radius() ==
            doctest::Approx(b.spectral_radius()).epsilon(1e-8));
    }
  }

  SUBCASE("built-in problems with protocol shifts")
  {
    struct Case
    {
      NepProblem problem;
      size_t target_from_back;
      Complex shift_offset;
    };
    const NepProblem ls = loaded_string(20, 20.0);
    const NepProblem cq = circle_quadratic(0.5);
    std::vector<Case> cases;
    cases.push_back({ls, 0, Complex(5.0)});
    cases.push_back({cq, 0, Complex(0.0)});  // resolved below against the 0.1 eigenvalue
    for (auto &[problem, back_index, offset] : cases)
    {
      const SpectrumReport spectrum = enumerate_spectrum(problem);
      const Eigentriplet &target = spectrum.triplets[spectrum.triplets.size() - 1 - back_index];
      const Index n = problem.dimension();
      const Vector c = canonical_eigenvector(target.right_vec) +
                       0.05 * Vector::Ones(n);
      const Complex sigma = (offset == Complex(0.0)) ? Complex(0.0) : target.lambda + offset;
      const ConvergenceMatrix a2 = matrix_a2(problem, sigma, c, target);
      const ConvergenceMatrix b = matrix_b(problem, sigma, c, target);
      CHECK(multiset_match(nonzero_factor_spectrum(a2), nonzero_factor_spectrum(b), 1e-8));
    }
  }
}

TEST_CASE("estimated factors")
{
  SUBCASE("geometric error sequence gives a constant ratio")
  {
    // Synthesize a trace whose iterates approach the reference geometrically.
    const Index n = 3;
    Eigentriplet ref;
    ref.lambda = Complex(2.0);
    ref.right_vec = unit(n, 0);
    ref.left_vec = unit(n, 0);
    IterationTrace trace;
    trace.c = unit(n, 0);
    Vector dir = Vector::Ones(n) - unit(n, 0);  // keeps c^H x = 1
    for (int k = 0; k < 12; ++k)
    {
      IterationRecord rec;
      rec.k = k;
      rec.mu = ref.lambda + std::pow(0.5, k);
      rec.x = unit(n, 0) + std::pow(0.5, k) * dir;
      trace.records.push_back(rec);
    }
    const auto rho = estimated_factors(trace, ref);
    REQUIRE(rho.size() == 12);
    CHECK(std::isnan(rho[0]));
    for (size_t k = 1; k < rho.size(); ++k)
    {
      CHECK(rho[k] == doctest::Approx(0.5).epsilon(1e-12));
    }
  }

  SUBCASE("QN4 ratios vanish and floored entries are marked invalid")
  {
    const NepProblem ls = loaded_string(20, 20.0);
    const SpectrumReport spectrum = enumerate_spectrum(ls);
    const Eigentriplet &target = spectrum.triplets[1];
    SolverConfig config = test::protocol_config(Variant::qn4, target, 0.05, Complex(5.0));
    const IterationTrace trace = run(ls, config);
    const auto rho = estimated_factors(trace, target);
    std::vector<double> valid;
    for (double r : rho)
    {
      if (!std::isnan(r))
      {
        valid.push_back(r);
      }
    }
    REQUIRE(valid.size() >= 2);
    CHECK(valid[valid.size() - 2] < 1e-2);  // superlinear tail
  }
}

TEST_CASE("empirical late-stage factors match the a-priori factors (left anchor)")
{
  const NepProblem ls = loaded_string(20, 20.0);
  const SpectrumReport spectrum = enumerate_spectrum(ls);
  const Eigentriplet &target = spectrum.triplets[1];
  const double a = 0.05;
  const Complex delta(5.0);

  const SolverConfig proto = test::protocol_config(Variant::qn1, target, a, delta, 1e-13, 300);
  const Vector x0n = proto.x0 / proto.c.dot(proto.x0);
  const double rho_a1 =
      matrix_a1(ls, proto.sigma, x0n, proto.c, target).spectral_radius();
  const double rho_b = matrix_b(ls, proto.sigma, proto.c, target).spectral_radius();

  for (Variant variant : {Variant::qn1, Variant::qn2, Variant::qn3})
  {
    CAPTURE(to_string(variant));
    SolverConfig config = test::protocol_config(variant, target, a, delta, 1e-13, 300);
    const IterationTrace trace = run(ls, config);
    REQUIRE(trace.status == TerminationStatus::converged);
    const auto late = test::late_stage_factors(trace, 1e-11, 1e-4);
    REQUIRE(late.size() >= 3);
    const double med = test::median(late);
    const double target_rho = (variant == Variant::qn1) ? rho_a1 : rho_b;
    CHECK(std::abs(med - target_rho) <= 0.1 * target_rho);
  }
}

TEST_CASE("condition numbers")
{
  SUBCASE("normal and diagonal linear problems have kappa = 1")
  {
    DeterministicRng rng(4);
    Matrix g = rng.complex_matrix(6, 6);
    const Matrix herm = 0.5 * (g + g.adjoint());
    for (const NepProblem &p : {linear(herm), linear(diag2(1.0, 3.0))})
    {
      const SpectrumReport spectrum = enumerate_spectrum(p);
      const ConditionReport report = condition_numbers(p, spectrum, Complex(0.9));
      REQUIRE(report.kappa.size() == spectrum.triplets.size());
      for (size_t i = 0; i < report.kappa.size(); ++i)
      {
        CHECK(report.kappa[i] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(!report.defective[i]);
      }
      CHECK(report.shift_distance.size() == report.kappa.size());
    }
  }

  SUBCASE("kappa is invariant under eigenvector rescaling")
  {
    const NepProblem p = circle_quadratic(0.5);
    SpectrumReport spectrum = enumerate_spectrum(p);
    const ConditionReport before = condition_numbers(p, spectrum);
    for (auto &t : spectrum.triplets)
    {
      t.right_vec *= 2.0;
      t.left_vec *= 3.0;
    }
    const ConditionReport after = condition_numbers(p, spectrum);
    for (size_t i = 0; i < before.kappa.size(); ++i)
    {
      CHECK(before.kappa[i] == doctest::Approx(after.kappa[i]).epsilon(1e-14));
      CHECK(before.kappa[i] >= 1.0 / spectral_norm(p.derivative(spectrum.triplets[i].lambda)));
    }
  }
}

TEST_CASE("clustering bound")
{
  const NepProblem ls = loaded_string(20, 20.0);
  const SpectrumReport spectrum = enumerate_spectrum(ls);

  SUBCASE("dominates rho(B) for the anchor targets")
  {
    for (size_t idx : {spectrum.triplets.size() - 1, size_t(1)})
    {
      const Eigentriplet &target = spectrum.triplets[idx];
      const Vector c = canonical_eigenvector(target.right_vec) + 0.05 * Vector::Ones(20);
      const Complex sigma = target.lambda + 5.0;
      const double rho_b = matrix_b(ls, sigma, c, target).spectral_radius();
      const double bound =
          clustering_bound(ls, sigma, c, spectrum, static_cast<Index>(idx), 0.0);
      CHECK(bound >= rho_b);
    }
  }

  SUBCASE("grows as the circle spectrum closes in on the target")
  {
    // The 0.1 eigenvalue of the quadratic circle family sits in a tighter cluster for
    // smaller radii, and the bound tracks that.
    auto bound_for = [](double r) {
      const NepProblem p = circle_quadratic(r);
      const SpectrumReport spectrum = enumerate_spectrum(p);
      size_t idx = 0;
      double dist = 1e300;
      for (size_t i = 0; i < spectrum.triplets.size(); ++i)
      {
        const double d = std::abs(spectrum.triplets[i].lambda - 0.1);
        if (d < dist)
        {
          dist = d;
          idx = i;
        }
      }
      const Vector c =
          canonical_eigenvector(spectrum.triplets[idx].right_vec) + 0.1 * Vector::Ones(10);
      return clustering_bound(p, Complex(0.0), c, spectrum, static_cast<Index>(idx), 0.0);
    };
    CHECK(bound_for(0.5) > bound_for(2.0));
    CHECK(bound_for(2.0) > bound_for(8.0));
  }

  SUBCASE("vanishes linearly as sigma approaches the target")
  {
    const size_t idx = spectrum.triplets.size() - 1;
    const Eigentriplet &target = spectrum.triplets[idx];
    const Vector c = canonical_eigenvector(target.right_vec);
    std::vector<double> ratio;
    for (int k = 1; k <= 4; ++k)
    {
      const double delta = 5.0 * std::pow(10.0, -k);
      const double bound = clustering_bound(ls, target.lambda + delta, c, spectrum,
                                            static_cast<Index>(idx), 0.0);
      ratio.push_back(bound / delta);
    }
    const double mid = test::median(ratio);
    for (double r : ratio)
    {
      CHECK(std::abs(r - mid) <= 0.25 * mid);
    }
  }
}

TEST_CASE("linear-case bound with equality for diagonal n = 2")
{
  // rho(B) <= ||P1|| |sigma - lambda_1| sum_i kappa_i / |sigma - lambda_i|, with equality
  // for a diagonal 2x2 problem and c = v1.
  const NepProblem p = linear(diag2(1.0, 3.0));
  const Eigentriplet target = diag_triplet(1.0, 2, 0);
  const Vector c = unit(2, 0);
  const Complex sigma(0.9);

  const double rho_b = matrix_b(p, sigma, c, target).spectral_radius();
  const Matrix p1 = Matrix::Identity(2, 2) - target.right_vec * c.adjoint();
  const double rhs = spectral_norm(p1) * std::abs(sigma - Complex(1.0)) *
                     (1.0 / std::abs(sigma - Complex(3.0)));
  CHECK(rho_b <= rhs * (1.0 + 1e-12));
  CHECK(rho_b == doctest::Approx(rhs).epsilon(1e-12));

  // Diagonalizable (non-normal) case keeps the inequality.
  DeterministicRng rng(21);
  const NepProblem q = test::random_linear_problem(6, 55);
  const SpectrumReport spectrum = enumerate_spectrum(q);
  const Eigentriplet &t1 = spectrum.triplets[0];
  const Vector cv = canonical_eigenvector(t1.right_vec);
  double gap = 1e300;
  for (size_t i = 1; i < spectrum.triplets.size(); ++i)
  {
    gap = std::min(gap, std::abs(spectrum.triplets[i].lambda - t1.lambda));
  }
  const Complex sig = t1.lambda + 0.2 * gap;
  const double rho_b2 = matrix_b(q, sig, cv, t1).spectral_radius();
  const Matrix p1b = Matrix::Identity(6, 6) - (t1.right_vec / cv.dot(t1.right_vec)) * cv.adjoint();
  const ConditionReport cond = condition_numbers(q, spectrum, sig);
  double sum = 0.0;
  for (size_t i = 1; i < spectrum.triplets.size(); ++i)
  {
    sum += cond.kappa[i] / std::abs(sig - spectrum.triplets[i].lambda);
  }
  CHECK(rho_b2 <= spectral_norm(p1b) * std::abs(sig - t1.lambda) * sum * (1.0 + 1e-10));
}

TEST_CASE("shift-distance scaling of rho(B)")
{
  const NepProblem ls = loaded_string(20, 20.0);
  const SpectrumReport spectrum = enumerate_spectrum(ls);
  const Eigentriplet &target = spectrum.triplets.back();
  const Vector c = canonical_eigenvector(target.right_vec) + 0.05 * Vector::Ones(20);
  std::vector<double> ratio;
  for (int k = 1; k <= 4; ++k)
  {
    const double delta = 5.0 * std::pow(10.0, -k);
    ratio.push_back(matrix_b(ls, target.lambda + delta, c, target).spectral_radius() / delta);
  }
  const double mid = test::median(ratio);
  for (double r : ratio)
  {
    CHECK(std::abs(r - mid) <= 0.2 * mid);
  }
}

TEST_CASE("factor construction rejects a shift on the eigenvalue")
{
  const NepProblem p = circle_quadratic(0.5);
  const SpectrumReport spectrum = enumerate_spectrum(p);
  const Eigentriplet &target = spectrum.triplets.back();
  CHECK_THROWS_AS(matrix_a2(p, Complex(0.1), Vector::Ones(10), target), FactorizationError);
}
