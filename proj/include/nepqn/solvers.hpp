// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nepqn/core.hpp"

namespace nepqn
{

enum class Variant
{
  qn1,  // fully frozen Jacobian at (sigma, x0)
  qn2,  // frozen (1,1) block, current derivative column
  qn3,  // residual inverse iteration (Rayleigh functional + frozen solve)
  qn4,  // method of successive linear problems (pencil solve per step)
};

enum class Qn2WMode
{
  derive_w_from_c,  // w_sigma^H = c^H M(sigma)^{-1}, one adjoint solve at setup
  fix_w_choose_c,   // user-fixed w_sigma, c := M(sigma)^H w_sigma
};

enum class TerminationStatus
{
  converged,
  max_iter,
  breakdown,
};

std::string to_string(Variant v);
std::string to_string(TerminationStatus s);

struct SolverConfig
{
  Variant variant = Variant::qn2;
  Complex sigma;
  Vector c;
  Complex mu0;
  Vector x0;
  double tol_residual = 1e-12;
  int max_iter = 100;
  Qn2WMode qn2_w_mode = Qn2WMode::derive_w_from_c;
  std::optional<Vector> w_sigma;           // only for fix_w_choose_c
  std::optional<Eigentriplet> reference;   // enables error/rho tracking
};

struct IterationRecord
{
  int k = 0;
  Complex mu;
  Vector x;
  double resid_norm = 0.0;              // ||M(mu_k) x_k||
  std::optional<Complex> delta_mu;      // step taken from k (absent on the final row)
  std::optional<double> delta_x_norm;
  std::optional<double> err_norm;       // ||[x_k - v; mu_k - lambda]|| against the reference
  std::optional<double> rho_est;        // err_k / err_{k-1}; absent below the round-off floor
  std::optional<double> r_k_norm;       // QN4 inexact-Newton residual norm
};

struct IterationTrace
{
  std::vector<IterationRecord> records;
  TerminationStatus status = TerminationStatus::max_iter;
  std::string breakdown_reason;
  Complex sigma;
  Vector c;  // resolved normalization vector (fix_w_choose_c replaces the configured c)
};

// Shared driver: pre-normalizes x0 to c^H x0 = 1, dispatches on the variant, records the
// trace and stops on ||M(mu_k) x_k|| <= tol * ||x_k||, max_iter, or breakdown.
IterationTrace run(const NepProblem &problem, const SolverConfig &config);

struct Qn1Precompute
{
  Vector q0;       // M(sigma)^{-1} M'(sigma) x0
  Complex alpha0;  // 1 / (c^H q0)
};

Qn1Precompute qn1_precompute(const NepProblem &problem, const ShiftFactorization &fact,
                             const Vector &c, const Vector &x0);

struct Qn1Step
{
  Complex mu_next;
  Vector x_next;
  Vector y;  // M(sigma)^{-1} M(mu_k) x_k
};

Qn1Step qn1_step(const NepProblem &problem, const ShiftFactorization &fact,
                 const Qn1Precompute &pre, const Vector &c, Complex mu, const Vector &x);

struct Step
{
  Complex mu_next;
  Vector x_next;
};

Step qn2_step(const NepProblem &problem, const ShiftFactorization &fact, const Vector &w_sigma,
              Complex mu, const Vector &x);

// Root mu of the Rayleigh functional w^H M(mu) x = 0, by scalar Newton from mu_init
// with a secant fallback on derivative breakdown.
Complex rayleigh_root(const NepProblem &problem, const Vector &w, const Vector &x,
                      Complex mu_init);

Step qn3_step(const NepProblem &problem, const ShiftFactorization &fact, const Vector &w_sigma,
              Complex mu, const Vector &x);

// One pencil solve M(mu) y = -dmu M'(mu) y; picks the smallest-modulus finite dmu
// (ties broken lexicographically by (re, im)) and rescales y to c^H y = 1.
Step qn4_step(const NepProblem &problem, Complex mu, const Vector &x, const Vector &c);

// ||r_k|| = |dmu_k| * ||M'(mu_k) dx_k|| for each recorded step of a QN4 trace.
std::vector<double> inexactness_residual(const NepProblem &problem, const IterationTrace &trace);

}  // namespace nepqn
