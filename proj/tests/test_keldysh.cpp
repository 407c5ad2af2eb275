// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "nepqn/keldysh.hpp"
#include "test_support.hpp"

using namespace nepqn;

namespace
{

Vector unit(Index n, Index i)
{
  Vector v = Vector::Zero(n);
  v(i) = 1.0;
  return v;
}

KeldyshDecomposition linear_diag12_decomposition()
{
  const NepProblem p = linear([] {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = 2.0;
    return m;
  }());
  KeldyshDecomposition d;
  d.problem = p;
  d.contour = {Complex(1.5), 3.0, 256};
  Eigentriplet t1{Complex(1.0), unit(2, 0), unit(2, 0)};
  Eigentriplet t2{Complex(2.0), unit(2, 1), unit(2, 1)};
  d.triplets = {t1, t2};
  return d;
}

Complex poly_eval(const std::vector<Complex> &coeffs, Complex z)
{
  Complex out = 0.0;
  for (size_t i = coeffs.size(); i-- > 0;)
  {
    out = out * z + coeffs[i];
  }
  return out;
}

}  // namespace

TEST_CASE("partial fraction of the diagonal linear family is the exact inverse")
{
  const KeldyshDecomposition d = linear_diag12_decomposition();
  const Complex z(0.4, 0.25);
  const Matrix sum = partial_fraction(d, z);
  CHECK(std::abs(sum(0, 0) - 1.0 / (1.0 - z)) <= 1e-14);
  CHECK(std::abs(sum(1, 1) - 1.0 / (2.0 - z)) <= 1e-14);
  CHECK(std::abs(sum(0, 1)) + std::abs(sum(1, 0)) <= 1e-15);

  SUBCASE("norm decays towards infinity")
  {
    const double n3 = spectral_norm(partial_fraction(d, Complex(1e3)));
    const double n6 = spectral_norm(partial_fraction(d, Complex(1e6)));
    CHECK(n6 < n3);
    CHECK(n6 <= 1e-5);
  }

  SUBCASE("pole guard")
  {
    CHECK_THROWS_AS(partial_fraction(d, Complex(1.0 + 1e-13)), DomainError);
  }

  SUBCASE("terms are invariant under eigenvector rescaling")
  {
    KeldyshDecomposition scaled = d;
    scaled.triplets[0].right_vec *= Complex(2.0, 1.0);
    scaled.triplets[0].left_vec *= Complex(0.0, 3.0);
    CHECK((partial_fraction(scaled, z) - sum).norm() <= 1e-14);
  }
}

TEST_CASE("partial fraction reconstructs the inverse of circle_quadratic")
{
  const NepProblem p = circle_quadratic(0.5);
  const SpectrumReport spectrum = enumerate_spectrum(p);
  KeldyshDecomposition d = decompose(p, {Complex(0.0), 1.5, 256}, spectrum);
  REQUIRE(d.triplets.size() == 20);

  DeterministicRng rng(12);
  for (int i = 0; i < 10; ++i)
  {
    Complex z;
    for (;;)
    {
      z = rng.complex_in_box(1.0);
      bool clear = true;
      for (const auto &t : spectrum.triplets)
      {
        clear = clear && std::abs(z - t.lambda) > 0.05;
      }
      if (clear)
      {
        break;
      }
    }
    const Matrix minv = p.evaluate(z).inverse();
    CHECK(spectral_norm(minv - d.partial_fraction(z)) <= 1e-8 * spectral_norm(minv));
  }
}

TEST_CASE("contour remainder of the counterexample carries f")
{
  const Contour contour{Complex(1.5), 3.0, 256};
  const Complex z(0.5);
  for (const auto &f : std::vector<std::vector<Complex>>{
           {Complex(1.0)}, {Complex(0.0), Complex(1.0)},
           {Complex(-3.0), Complex(0.0), Complex(1.0)}})
  {
    const NepProblem p = counterexample(f);
    const Matrix r = contour_remainder(p, contour, z);
    CHECK(std::abs(r(0, 1) - poly_eval(f, z)) <= 1e-10);
    CHECK(std::abs(r(0, 0)) <= 1e-10);
    CHECK(std::abs(r(1, 0)) <= 1e-10);
    CHECK(std::abs(r(1, 1)) <= 1e-10);
  }
}

TEST_CASE("contour remainder vanishes when the partial fraction is exact")
{
  SUBCASE("diagonal linear family")
  {
    const KeldyshDecomposition d = linear_diag12_decomposition();
    const Matrix r = contour_remainder(d.problem, d.contour, Complex(0.3));
    CHECK(spectral_norm(r) <= 1e-10);
  }

  SUBCASE("circle_quadratic with all eigenvalues enclosed")
  {
    DeterministicRng rng(3);
    for (double radius : {0.5, 2.0})
    {
      const NepProblem p = circle_quadratic(radius);
      const Contour contour{Complex(0.0), 3.0 * std::max(radius, 0.1), 256};
      for (int i = 0; i < 3; ++i)
      {
        const Complex z = 0.4 * contour.radius * rng.complex_in_box(1.0) + Complex(0.21, 0.13);
        CHECK(spectral_norm(contour_remainder(p, contour, z)) <= 1e-8);
      }
    }
  }
}

TEST_CASE("decompose")
{
  const NepProblem p = circle_quadratic(0.5);
  const SpectrumReport spectrum = enumerate_spectrum(p);

  SUBCASE("empty contour leaves the full inverse as remainder")
  {
    const KeldyshDecomposition d =
        decompose(p, {Complex(5.0), 0.5, 128}, spectrum, RemainderMode::residual);
    CHECK(d.triplets.empty());
    const Complex z(5.1, 0.1);
    const Matrix minv = p.evaluate(z).inverse();
    CHECK(spectral_norm(d.remainder(z) - minv) <= 1e-12 * spectral_norm(minv));
    // The Cauchy integral of the analytic inverse reproduces it as well.
    CHECK(spectral_norm(contour_remainder(p, {Complex(5.0), 0.5, 128}, z) - minv) <=
          1e-10 * spectral_norm(minv));
  }

  SUBCASE("cross-mode consistency on the counterexample")
  {
    const NepProblem ce = counterexample({Complex(0.0), Complex(1.0)});
    SpectrumReport known;
    known.triplets = {triplet_from_eigenvalue(ce, Complex(1.0)),
                      triplet_from_eigenvalue(ce, Complex(2.0))};
    known.defective = {false, false};
    const Contour contour{Complex(1.5), 3.0, 256};
    const KeldyshDecomposition residual = decompose(ce, contour, known,
                                                    RemainderMode::residual);
    const KeldyshDecomposition integral = decompose(ce, contour, known,
                                                    RemainderMode::integral);
    DeterministicRng rng(8);
    for (int i = 0; i < 10; ++i)
    {
      const Complex z = Complex(1.5) + rng.complex_in_box(1.2);
      if (std::abs(z - 1.0) < 0.05 || std::abs(z - 2.0) < 0.05)
      {
        continue;
      }
      CHECK(spectral_norm(residual.remainder(z) - integral.remainder(z)) <= 1e-9);
    }
  }

  SUBCASE("loaded string around the left cluster")
  {
    const NepProblem ls = loaded_string(20, 20.0);
    const SpectrumReport full = enumerate_spectrum(ls);
    const Contour contour{Complex(9.07), 5.0, 256};
    const KeldyshDecomposition d = decompose(ls, contour, full, RemainderMode::integral);
    CHECK(d.triplets.size() == 1);  // only 9.068... lies within distance 5 of the center
    const Complex z(8.0, 0.5);
    const Matrix minv = ls.evaluate(z).inverse();
    const Matrix gap = minv - d.partial_fraction(z) - d.remainder(z);
    CHECK(spectral_norm(gap) <= 1e-8 * spectral_norm(minv));
  }

  SUBCASE("node collision triggers one radius retry")
  {
    // Eigenvalue 0.5 of circle_quadratic(0.5) sits exactly on the radius-0.5 node set.
    const KeldyshDecomposition d = decompose(p, {Complex(0.0), 0.5, 256}, spectrum);
    CHECK(d.contour.radius == doctest::Approx(0.505));
  }

  SUBCASE("defective enclosed eigenvalue is rejected")
  {
    SpectrumReport tampered = spectrum;
    tampered.defective[3] = true;
    CHECK_THROWS_AS(decompose(p, {Complex(0.0), 1.5, 128}, tampered), UnsupportedError);
  }
}

TEST_CASE("Keldysh identity within the quadrature error budget")
{
  const std::vector<NepProblem> problems = {circle_quadratic(0.5),
                                            test::random_linear_problem(6, 31)};
  DeterministicRng rng(5);
  for (const NepProblem &p : problems)
  {
    const SpectrumReport spectrum = enumerate_spectrum(p);
    double spread = 1.0;
    for (const auto &t : spectrum.triplets)
    {
      spread = std::max(spread, std::abs(t.lambda));
    }
    Contour contour{Complex(0.0), 2.5 * spread, 256};
    const KeldyshDecomposition d = decompose(p, contour, spectrum, RemainderMode::integral);

    for (int i = 0; i < 10; ++i)
    {
      Complex z;
      for (;;)
      {
        z = 0.5 * contour.radius * rng.complex_in_box(1.0);
        bool clear = true;
        for (const auto &t : spectrum.triplets)
        {
          clear = clear && std::abs(z - t.lambda) > 0.02 * contour.radius;
        }
        if (clear)
        {
          break;
        }
      }
      // Error budget estimated from node doubling.
      Contour doubled = contour;
      doubled.node_count = 512;
      const Matrix r256 = contour_remainder(p, contour, z);
      const Matrix r512 = contour_remainder(p, doubled, z);
      const double budget = std::max(spectral_norm(r256 - r512), 1e-14);
      const Matrix minv = p.evaluate(z).inverse();
      const Matrix gap = minv - d.partial_fraction(z) - r256;
      CHECK(spectral_norm(gap) <= 10.0 * budget + 1e-10 * spectral_norm(minv));
    }
  }
}

TEST_CASE("quadrature converges geometrically under node doubling")
{
  const NepProblem p = circle_quadratic(0.5);
  const Complex z(0.3, 0.2);
  Matrix prev;
  std::vector<double> diffs;
  for (int nodes : {64, 128, 256})
  {
    const Matrix r = contour_remainder(p, {Complex(0.0), 1.5, nodes}, z);
    if (prev.size() > 0)
    {
      diffs.push_back(spectral_norm(r - prev));
    }
    prev = r;
  }
  CHECK(diffs[1] <= 0.5 * diffs[0] + 1e-14);
}

TEST_CASE("residue-theorem nullity on the quadrature nodes")
{
  const Contour contour{Complex(0.0), 2.0, 256};
  const Complex lambda_i(0.7, 0.1);
  const Complex z(-0.4, 0.6);
  Complex integral = 0.0;
  for (int j = 0; j < contour.node_count; ++j)
  {
    const Complex l = contour.node(j);
    integral += contour.weight(j) / ((l - lambda_i) * (l - z));
  }
  CHECK(std::abs(integral) <= 1e-12);
}

TEST_CASE("remainder decay tables")
{
  SUBCASE("circle_quadratic decays like r^-2")
  {
    const NepProblem p = circle_quadratic(0.5);
    const std::vector<double> radii = {4.0, 8.0, 16.0, 32.0};
    const auto table = remainder_decay(p, Complex(0.0), radii, {Complex(0.2, 0.1)}, 128);
    REQUIRE(table.size() == 4);
    for (size_t i = 1; i < table.size(); ++i)
    {
      const double ratio = table[i].max_inv_norm / table[i - 1].max_inv_norm;
      CHECK(ratio <= 0.3);   // r^-2 halves twice per doubling
      CHECK(ratio >= 0.15);
    }
    for (const auto &row : table)
    {
      CHECK(!row.skipped);
      CHECK(row.remainder_norms[0] <= 1e-8);
    }
  }

  SUBCASE("linear decays like r^-1")
  {
    const NepProblem p = test::random_linear_problem(5, 20);
    const std::vector<double> radii = {16.0, 32.0, 64.0};
    const auto table = remainder_decay(p, Complex(0.0), radii, {Complex(0.3)}, 128);
    for (size_t i = 1; i < table.size(); ++i)
    {
      const double ratio = table[i].max_inv_norm / table[i - 1].max_inv_norm;
      CHECK(ratio <= 0.7);
      CHECK(ratio >= 0.3);
    }
  }

  SUBCASE("nonconstant f does not decay")
  {
    const NepProblem p = counterexample({Complex(0.0), Complex(1.0)});  // f(z) = z
    const Complex z(0.5, 0.25);
    const std::vector<double> radii = {8.0, 64.0, 512.0};
    const auto table = remainder_decay(p, Complex(1.5), radii, {z}, 256);
    for (const auto &row : table)
    {
      REQUIRE(!row.skipped);
      CHECK(row.remainder_norms[0] == doctest::Approx(std::abs(z)).epsilon(1e-6));
    }
  }

  SUBCASE("pole on the contour is skipped with a note")
  {
    const NepProblem p = loaded_string(8, 8.0);
    const auto table = remainder_decay(p, Complex(0.0), {1.0, 2.0}, {Complex(0.5, 0.2)}, 64);
    REQUIRE(table.size() == 2);
    CHECK(table[0].skipped);       // pole at 1 sits on the radius-1 circle
    CHECK(!table[0].note.empty());
    CHECK(!table[1].skipped);
  }
}
