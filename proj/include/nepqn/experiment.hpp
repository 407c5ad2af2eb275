// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nepqn/analysis.hpp"
#include "nepqn/keldysh.hpp"
#include "nepqn/problems.hpp"
#include "nepqn/solvers.hpp"

namespace nepqn
{

// Exit codes shared by the experiment commands and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitBreakdown = 2;
inline constexpr int kExitMaxIter = 3;
inline constexpr int kExitAssertionFailed = 4;

struct ProblemSpec
{
  std::string name;  // loaded_string | circle_quadratic | counterexample | linear |
                     // polynomial | rational
  Index n = 20;
  double c_scale = 20.0;
  double radius = 0.5;
  Matrix matrix;                                  // linear
  std::vector<Complex> f;                         // counterexample
  std::vector<Matrix> coeffs;                     // polynomial / rational
  std::vector<NepProblem::RationalTerm> terms;    // rational

  NepProblem build() const;
  NepProblem build_with_radius(double r) const;  // for radius sweeps
};

struct TargetSelect
{
  enum class Kind
  {
    nearest,
    rightmost,
    leftmost,
    index,
  };
  Kind kind = Kind::rightmost;
  Complex value;  // nearest
  Index index = 0;
};

// A complex value that may be given relative to the selected target eigenvalue.
struct AnchoredValue
{
  Complex value;
  bool relative_to_target = false;

  Complex resolve(std::optional<Complex> target) const;
};

struct VectorRecipe
{
  enum class Mode
  {
    ones,
    reference_plus_ones,  // v_ref + a * [1 ... 1]^T
    random,
    explicit_values,
  };
  Mode mode = Mode::ones;
  double a = 0.0;
  std::uint64_t seed = 1;
  Vector values;
};

struct CRecipe
{
  enum class Mode
  {
    x0,
    ones,
    explicit_values,
  };
  Mode mode = Mode::x0;
  Vector values;
};

struct SolverSpec
{
  Variant variant = Variant::qn2;
  AnchoredValue mu0;
  std::optional<AnchoredValue> sigma;  // defaults to mu0
  VectorRecipe x0;
  CRecipe c;
  double tol_residual = 1e-12;
  int max_iter = 100;
  Qn2WMode w_mode = Qn2WMode::derive_w_from_c;
  std::optional<Vector> w_sigma;  // only with fix_w_choose_c

  enum class Reference
  {
    qn4,       // run QN4 from mu0 to residual 1e-14; its limit is the error oracle
    spectrum,  // take the selected triplet of enumerate_spectrum
    none,
  };
  Reference reference = Reference::qn4;
};

struct AnalysisSpec
{
  bool emit_a_priori = false;
  double remainder_norm = 0.0;  // ||R_Gamma(sigma)|| handed to the clustering bound
};

struct SweepSpec
{
  enum class Parameter
  {
    radius,
    shift_delta,
  };
  Parameter parameter = Parameter::radius;
  std::vector<double> values;
  int slope_fit_count = 0;  // 0: fit over all points
};

struct ProbeSpec
{
  std::vector<Complex> explicit_probes;
  int count = 10;
  std::uint64_t seed = 7;
  double scale = 0.6;  // probes drawn inside scale * radius
};

struct ContourSpec
{
  Complex center;
  double radius = 1.0;
  int nodes = 256;
  RemainderMode mode = RemainderMode::residual;
  ProbeSpec probes;
  std::vector<double> decay_radii;
};

struct ExperimentConfig
{
  ProblemSpec problem;
  std::optional<TargetSelect> target;
  std::optional<SolverSpec> solver;
  AnalysisSpec analysis;
  std::optional<SweepSpec> sweep;
  std::optional<ContourSpec> contour;
  std::vector<Complex> known_eigenvalues;  // spectrum fallback for problems without
                                           // a companion linearization route
  std::optional<std::string> output;

  static ExperimentConfig load(const std::string &path);
  static ExperimentConfig parse_json_text(const std::string &text);
};

struct CommandOptions
{
  std::optional<std::string> out;   // overrides config output path
  std::optional<int> nodes;         // overrides contour node count
  bool quiet = false;
};

// The four experiment commands. Each writes one CSV file and a short summary to `log`
// (suppressed by quiet) and returns an exit code.
int cmd_solve(const ExperimentConfig &config, const CommandOptions &options, std::ostream &log);
int cmd_factors(const ExperimentConfig &config, const CommandOptions &options, std::ostream &log);
int cmd_sweep(const ExperimentConfig &config, const CommandOptions &options, std::ostream &log);
int cmd_keldysh(const ExperimentConfig &config, const CommandOptions &options, std::ostream &log);

// Serialize a double with 17 significant digits ('.' decimal separator, no locale).
std::string format_double(double value);

}  // namespace nepqn
