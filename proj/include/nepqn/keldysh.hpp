// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "nepqn/problems.hpp"

namespace nepqn
{

// Circle with equispaced trapezoidal quadrature nodes. For analytic integrands the
// trapezoid rule on a circle converges exponentially in node_count.
struct Contour
{
  Complex center;
  double radius = 1.0;
  int node_count = 256;

  Complex node(int j) const;
  // Weight such that (1/2 pi i) contour-integral f(lambda) dlambda ~ sum_j weight(j) f(node(j)).
  Complex weight(int j) const;
  bool strictly_inside(Complex z, double margin = 0.0) const;
};

enum class RemainderMode
{
  residual,  // R(z) = M(z)^{-1} - partial fraction sum (needs the full inside spectrum)
  integral,  // trapezoidal quadrature of (1/2 pi i) contour-integral M(lambda)^{-1}/(lambda - z)
};

struct KeldyshDecomposition
{
  NepProblem problem;
  Contour contour;
  std::vector<Eigentriplet> triplets;  // enclosed, all simple
  RemainderMode mode = RemainderMode::residual;

  Matrix partial_fraction(Complex z) const;
  Matrix remainder(Complex z) const;
};

// sum_i v_i u_i^H / ((z - lambda_i) u_i^H M'(lambda_i) v_i).
Matrix partial_fraction(const KeldyshDecomposition &decomp, Complex z);

// Quadrature of (1/2 pi i) contour-integral M(lambda)^{-1} / (lambda - z) dlambda, one
// dense solve per node. Equals the Keldysh remainder for the eigenvalues inside.
Matrix contour_remainder(const NepProblem &problem, const Contour &contour, Complex z);

// Filter the enclosed triplets of the supplied spectrum and set up a remainder
// evaluator. Guards quadrature nodes against eigenvalue collisions (one automatic
// 1% radius perturbation retry).
KeldyshDecomposition decompose(const NepProblem &problem, Contour contour,
                               const SpectrumReport &spectrum,
                               RemainderMode mode = RemainderMode::residual);

struct RemainderDecayRow
{
  double radius = 0.0;
  double max_inv_norm = 0.0;               // max over nodes of ||M(lambda)^{-1}||
  std::vector<double> remainder_norms;     // ||R_Gamma(z)|| per probe
  bool skipped = false;
  std::string note;
};

// Decay table of the remainder over growing contour radii; rows are skipped (with a
// note) when a pole of the problem lands on the contour.
std::vector<RemainderDecayRow> remainder_decay(const NepProblem &problem, Complex center,
                                               const std::vector<double> &radii,
                                               const std::vector<Complex> &probes,
                                               int node_count = 256);

}  // namespace nepqn
