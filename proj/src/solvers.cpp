// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "nepqn/solvers.hpp"

#include <cmath>
#include <limits>

#include "pencil.hpp"

namespace nepqn
{

namespace
{

constexpr double kBreakdownTol = 1e-14;

}  // namespace

std::string to_string(Variant v)
{
  switch (v)
  {
    case Variant::qn1:
      return "QN1";
    case Variant::qn2:
      return "QN2";
    case Variant::qn3:
      return "QN3";
    case Variant::qn4:
      return "QN4";
  }
  return "?";
}

std::string to_string(TerminationStatus s)
{
  switch (s)
  {
    case TerminationStatus::converged:
      return "converged";
    case TerminationStatus::max_iter:
      return "max_iter";
    case TerminationStatus::breakdown:
      return "breakdown";
  }
  return "?";
}

Qn1Precompute qn1_precompute(const NepProblem &problem, const ShiftFactorization &fact,
                             const Vector &c, const Vector &x0)
{
  Qn1Precompute pre;
  pre.q0 = fact.solve(problem.derivative(fact.shift()) * x0);
  const Complex cq = c.dot(pre.q0);
  if (std::abs(cq) < kBreakdownTol)
  {
    throw BreakdownError("QN1 precompute: |c^H q0| below breakdown tolerance");
  }
  pre.alpha0 = 1.0 / cq;
  return pre;
}

Qn1Step qn1_step(const NepProblem &problem, const ShiftFactorization &fact,
                 const Qn1Precompute &pre, const Vector &c, Complex mu, const Vector &x)
{
  Qn1Step step;
  step.y = fact.solve(problem.evaluate(mu) * x);
  const Complex dmu = -pre.alpha0 * c.dot(step.y);
  step.mu_next = mu + dmu;
  step.x_next = x - step.y - dmu * pre.q0;
  return step;
}

Step qn2_step(const NepProblem &problem, const ShiftFactorization &fact, const Vector &w_sigma,
              Complex mu, const Vector &x)
{
  const Vector u = problem.evaluate(mu) * x;
  const Vector w = problem.derivative(mu) * x;
  const Complex denom = w_sigma.dot(w);
  if (std::abs(denom) < kBreakdownTol * x.norm())
  {
    throw BreakdownError("QN2: |w_sigma^H M'(mu) x| below breakdown tolerance");
  }
  const Complex dmu = -w_sigma.dot(u) / denom;
  const Vector z = dmu * w + u;
  return {mu + dmu, x - fact.solve(z)};
}

Complex rayleigh_root(const NepProblem &problem, const Vector &w, const Vector &x,
                      Complex mu_init)
{
  const double wx_scale = w.norm() * x.norm();
  Complex mu = mu_init;
  Complex mu_prev = mu;
  Complex g_prev = 0.0;
  bool have_prev = false;

  // Once |g| stops decreasing the iteration is bouncing inside the scalar round-off
  // ball; the best iterate seen is the root to working accuracy.
  Complex best_mu = mu;
  double best_abs = std::numeric_limits<double>::infinity();
  int stalled = 0;

  for (int it = 0; it < 50; ++it)
  {
    const Vector u = problem.evaluate(mu) * x;
    const Complex g = w.dot(u);
    const double ag = std::abs(g);
    // Accept against the scale of the computed residual vector; the coarser
    // ||M|| ||x|| ||w|| product overestimates it near convergence and would leave
    // the root (and with it c^H x_{k+1}) polluted well above round-off.
    if (ag <= 1e-14 * (1.0 + w.norm() * u.norm()))
    {
      return mu;
    }
    if (ag < best_abs)
    {
      best_abs = ag;
      best_mu = mu;
      stalled = 0;
    }
    else if (++stalled >= 3)
    {
      return best_mu;
    }
    const Complex gp = w.dot(problem.derivative(mu) * x);
    Complex step;
    if (std::abs(gp) >= kBreakdownTol * wx_scale)
    {
      step = -g / gp;
    }
    else if (have_prev && std::abs(g - g_prev) >= kBreakdownTol * std::abs(g))
    {
      step = -g * (mu - mu_prev) / (g - g_prev);  // secant fallback
    }
    else
    {
      throw ConvergenceError("Rayleigh functional: derivative breakdown", mu);
    }
    mu_prev = mu;
    g_prev = g;
    have_prev = true;
    if (std::abs(step) <= 1e-16 * (1.0 + std::abs(mu)))
    {
      return mu;
    }
    mu += step;
  }
  throw ConvergenceError("Rayleigh functional: no convergence in 50 iterations", mu);
}

Step qn3_step(const NepProblem &problem, const ShiftFactorization &fact, const Vector &w_sigma,
              Complex mu, const Vector &x)
{
  const Complex mu_next = rayleigh_root(problem, w_sigma, x, mu);
  return {mu_next, x - fact.solve(problem.evaluate(mu_next) * x)};
}

Step qn4_step(const NepProblem &problem, Complex mu, const Vector &x, const Vector &c)
{
  const auto eig = detail::generalized_eigen(problem.evaluate(mu), -problem.derivative(mu));
  const size_t n = eig.alphas.size();
  std::optional<size_t> best;
  Complex best_dmu;
  for (size_t i = 0; i < n; ++i)
  {
    if (eig.betas[i] == 0.0)
    {
      continue;  // infinite pencil eigenvalue
    }
    const Complex dmu = eig.alphas[i] / eig.betas[i];
    if (!std::isfinite(dmu.real()) || !std::isfinite(dmu.imag()))
    {
      continue;
    }
    const bool better =
        !best || std::abs(dmu) < std::abs(best_dmu) ||
        (std::abs(dmu) == std::abs(best_dmu) &&
         std::pair(dmu.real(), dmu.imag()) < std::pair(best_dmu.real(), best_dmu.imag()));
    if (better)
    {
      best = i;
      best_dmu = dmu;
    }
  }
  if (!best)
  {
    throw BreakdownError("QN4: pencil has no finite eigenvalue");
  }
  const Vector y = eig.right_vectors.col(static_cast<Index>(*best));
  const Complex cy = c.dot(y);
  if (std::abs(cy) < kBreakdownTol * y.norm())
  {
    throw BreakdownError("QN4: |c^H y| below breakdown tolerance");
  }
  return {mu + best_dmu, y / cy};
}

IterationTrace run(const NepProblem &problem, const SolverConfig &config)
{
  const Index n = problem.dimension();
  if (config.x0.size() != n || config.c.size() != n)
  {
    throw ConfigError("solver config: dimension mismatch");
  }

  IterationTrace trace;
  trace.sigma = config.sigma;
  trace.c = config.c;

  // QN4 factors a fresh pencil every step and never touches M(sigma).
  std::optional<ShiftFactorization> fact;
  if (config.variant != Variant::qn4)
  {
    fact.emplace(problem, config.sigma);
  }

  Vector w_sigma;
  if (config.variant == Variant::qn2 || config.variant == Variant::qn3)
  {
    if (config.qn2_w_mode == Qn2WMode::fix_w_choose_c)
    {
      if (!config.w_sigma)
      {
        throw ConfigError("fix_w_choose_c needs an explicit w_sigma");
      }
      w_sigma = *config.w_sigma;
      trace.c = problem.evaluate(config.sigma).adjoint() * w_sigma;  // c^H = w^H M(sigma)
    }
    else
    {
      w_sigma = fact->adjoint_solve(trace.c);  // w^H = c^H M(sigma)^{-1}
    }
  }

  const Complex cx0 = trace.c.dot(config.x0);
  if (std::abs(cx0) < kBreakdownTol * config.x0.norm())
  {
    throw ConfigError("c is (numerically) orthogonal to x0");
  }
  Vector x = config.x0 / cx0;
  Complex mu = config.mu0;

  std::optional<Qn1Precompute> pre;

  // Reference in the iteration's normalization, for error tracking.
  std::optional<std::pair<Complex, Vector>> ref;
  if (config.reference)
  {
    const Complex cv = trace.c.dot(config.reference->right_vec);
    if (std::abs(cv) > kBreakdownTol * config.reference->right_vec.norm())
    {
      ref = {config.reference->lambda, config.reference->right_vec / cv};
    }
  }

  trace.status = TerminationStatus::max_iter;
  for (int k = 0;; ++k)
  {
    IterationRecord rec;
    rec.k = k;
    rec.mu = mu;
    rec.x = x;
    rec.resid_norm = (problem.evaluate(mu) * x).norm();
    if (ref)
    {
      rec.err_norm = AugmentedVector{x - ref->second, mu - ref->first}.norm();
    }
    trace.records.push_back(std::move(rec));

    if (trace.records.back().resid_norm <= config.tol_residual * x.norm())
    {
      trace.status = TerminationStatus::converged;
      break;
    }
    if (k == config.max_iter)
    {
      trace.status = TerminationStatus::max_iter;
      break;
    }

    try
    {
      switch (config.variant)
      {
        case Variant::qn1:
        {
          if (!pre)
          {
            pre = qn1_precompute(problem, *fact, trace.c, x);
          }
          auto s = qn1_step(problem, *fact, *pre, trace.c, mu, x);
          mu = s.mu_next;
          x = std::move(s.x_next);
          break;
        }
        case Variant::qn2:
        {
          auto s = qn2_step(problem, *fact, w_sigma, mu, x);
          mu = s.mu_next;
          x = std::move(s.x_next);
          break;
        }
        case Variant::qn3:
        {
          auto s = qn3_step(problem, *fact, w_sigma, mu, x);
          mu = s.mu_next;
          x = std::move(s.x_next);
          break;
        }
        case Variant::qn4:
        {
          auto s = qn4_step(problem, mu, x, trace.c);
          mu = s.mu_next;
          x = std::move(s.x_next);
          break;
        }
      }
    }
    catch (const NepError &e)
    {
      trace.status = TerminationStatus::breakdown;
      trace.breakdown_reason = e.what();
      break;
    }
  }

  // Per-step quantities derived from consecutive records.
  for (size_t k = 0; k + 1 < trace.records.size(); ++k)
  {
    auto &rec = trace.records[k];
    const auto &next = trace.records[k + 1];
    rec.delta_mu = next.mu - rec.mu;
    rec.delta_x_norm = (next.x - rec.x).norm();
    if (config.variant == Variant::qn4)
    {
      rec.r_k_norm =
          std::abs(*rec.delta_mu) * (problem.derivative(rec.mu) * (next.x - rec.x)).norm();
    }
  }
  for (size_t k = 1; k < trace.records.size(); ++k)
  {
    const auto &prev = trace.records[k - 1];
    if (prev.err_norm && *prev.err_norm >= 1e-13 && trace.records[k].err_norm)
    {
      trace.records[k].rho_est = *trace.records[k].err_norm / *prev.err_norm;
    }
  }
  return trace;
}

std::vector<double> inexactness_residual(const NepProblem &problem, const IterationTrace &trace)
{
  std::vector<double> out;
  for (size_t k = 0; k + 1 < trace.records.size(); ++k)
  {
    const auto &rec = trace.records[k];
    const auto &next = trace.records[k + 1];
    out.push_back(std::abs(next.mu - rec.mu) *
                  (problem.derivative(rec.mu) * (next.x - rec.x)).norm());
  }
  return out;
}

}  // namespace nepqn
