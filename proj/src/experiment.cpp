// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "nepqn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "nepqn/rng.hpp"

namespace nepqn
{

using nlohmann::json;

namespace
{

// ---------------------------------------------------------------------------
// Config parsing. Unknown keys are rejected so that typos cannot silently
// change an experiment.
// ---------------------------------------------------------------------------

void require_keys(const json &j, const std::string &path,
                  std::initializer_list<const char *> allowed)
{
  if (!j.is_object())
  {
    throw ConfigError("config: '" + path + "' must be an object");
  }
  for (const auto &item : j.items())
  {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char *k) { return item.key() == k; }))
    {
      throw ConfigError("config: unknown key '" + path + "." + item.key() + "'");
    }
  }
}

double parse_real(const json &j, const std::string &path)
{
  if (!j.is_number())
  {
    throw ConfigError("config: '" + path + "' must be a number");
  }
  return j.get<double>();
}

Complex parse_complex(const json &j, const std::string &path)
{
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
  {
    throw ConfigError("config: '" + path + "' must be a [re, im] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Vector parse_cvector(const json &j, const std::string &path)
{
  if (!j.is_array() || j.empty())
  {
    throw ConfigError("config: '" + path + "' must be a non-empty array of [re, im] pairs");
  }
  Vector v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i)
  {
    v(static_cast<Index>(i)) = parse_complex(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

Matrix parse_cmatrix(const json &j, const std::string &path)
{
  if (!j.is_array() || j.empty())
  {
    throw ConfigError("config: '" + path + "' must be a non-empty array of rows");
  }
  const auto rows = static_cast<Index>(j.size());
  const auto cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
  {
    if (static_cast<Index>(j[static_cast<size_t>(i)].size()) != cols)
    {
      throw ConfigError("config: '" + path + "' rows have inconsistent lengths");
    }
    for (Index k = 0; k < cols; ++k)
    {
      m(i, k) = parse_complex(j[static_cast<size_t>(i)][static_cast<size_t>(k)],
                              path + "[" + std::to_string(i) + "]");
    }
  }
  return m;
}

AnchoredValue parse_anchored(const json &j, const std::string &path)
{
  AnchoredValue out;
  if (j.is_object())
  {
    require_keys(j, path, {"target_plus"});
    out.value = parse_complex(j.at("target_plus"), path + ".target_plus");
    out.relative_to_target = true;
  }
  else
  {
    out.value = parse_complex(j, path);
  }
  return out;
}

std::vector<double> parse_value_list(const json &j, const std::string &path)
{
  if (j.is_object())
  {
    require_keys(j, path, {"logspace"});
    const json &ls = j.at("logspace");
    if (!ls.is_array() || ls.size() != 3)
    {
      throw ConfigError("config: '" + path + ".logspace' must be [exp_from, exp_to, count]");
    }
    const double lo = ls[0].get<double>();
    const double hi = ls[1].get<double>();
    const int count = ls[2].get<int>();
    if (count < 1)
    {
      throw ConfigError("config: '" + path + ".logspace' needs count >= 1");
    }
    std::vector<double> values;
    for (int i = 0; i < count; ++i)
    {
      const double e = (count == 1) ? lo : lo + (hi - lo) * i / (count - 1);
      values.push_back(std::pow(10.0, e));
    }
    return values;
  }
  if (!j.is_array() || j.empty())
  {
    throw ConfigError("config: '" + path + "' must be a value array or {\"logspace\": ...}");
  }
  std::vector<double> values;
  for (size_t i = 0; i < j.size(); ++i)
  {
    values.push_back(parse_real(j[i], path));
  }
  return values;
}

ProblemSpec parse_problem(const json &j)
{
  require_keys(j, "problem", {"name", "n", "c_scale", "r", "matrix", "f", "coeffs", "terms"});
  ProblemSpec spec;
  spec.name = j.at("name").get<std::string>();
  if (j.contains("n"))
  {
    spec.n = j.at("n").get<Index>();
  }
  if (j.contains("c_scale"))
  {
    spec.c_scale = parse_real(j.at("c_scale"), "problem.c_scale");
  }
  if (j.contains("r"))
  {
    spec.radius = parse_real(j.at("r"), "problem.r");
  }
  if (j.contains("matrix"))
  {
    spec.matrix = parse_cmatrix(j.at("matrix"), "problem.matrix");
  }
  if (j.contains("f"))
  {
    const Vector f = parse_cvector(j.at("f"), "problem.f");
    spec.f.assign(f.data(), f.data() + f.size());
  }
  if (j.contains("coeffs"))
  {
    for (size_t i = 0; i < j.at("coeffs").size(); ++i)
    {
      spec.coeffs.push_back(
          parse_cmatrix(j.at("coeffs")[i], "problem.coeffs[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("terms"))
  {
    for (size_t i = 0; i < j.at("terms").size(); ++i)
    {
      const std::string path = "problem.terms[" + std::to_string(i) + "]";
      const json &t = j.at("terms")[i];
      require_keys(t, path, {"pole", "coeff"});
      spec.terms.push_back({parse_complex(t.at("pole"), path + ".pole"),
                            parse_cmatrix(t.at("coeff"), path + ".coeff")});
    }
  }
  return spec;
}

TargetSelect parse_target(const json &j)
{
  require_keys(j, "target", {"select", "value", "index"});
  TargetSelect t;
  const std::string select = j.at("select").get<std::string>();
  if (select == "nearest")
  {
    t.kind = TargetSelect::Kind::nearest;
    t.value = parse_complex(j.at("value"), "target.value");
  }
  else if (select == "rightmost")
  {
    t.kind = TargetSelect::Kind::rightmost;
  }
  else if (select == "leftmost")
  {
    t.kind = TargetSelect::Kind::leftmost;
  }
  else if (select == "index")
  {
    t.kind = TargetSelect::Kind::index;
    t.index = j.at("index").get<Index>();
  }
  else
  {
    throw ConfigError("config: target.select must be nearest|rightmost|leftmost|index");
  }
  return t;
}

VectorRecipe parse_x0(const json &j)
{
  require_keys(j, "solver.x0", {"mode", "a", "seed", "values"});
  VectorRecipe r;
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "ones")
  {
    r.mode = VectorRecipe::Mode::ones;
  }
  else if (mode == "reference_plus_ones")
  {
    r.mode = VectorRecipe::Mode::reference_plus_ones;
    r.a = parse_real(j.at("a"), "solver.x0.a");
  }
  else if (mode == "random")
  {
    r.mode = VectorRecipe::Mode::random;
    if (j.contains("seed"))
    {
      r.seed = j.at("seed").get<std::uint64_t>();
    }
  }
  else if (mode == "explicit")
  {
    r.mode = VectorRecipe::Mode::explicit_values;
    r.values = parse_cvector(j.at("values"), "solver.x0.values");
  }
  else
  {
    throw ConfigError("config: solver.x0.mode must be ones|reference_plus_ones|random|explicit");
  }
  return r;
}

CRecipe parse_c(const json &j)
{
  require_keys(j, "solver.c", {"mode", "values"});
  CRecipe r;
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "x0")
  {
    r.mode = CRecipe::Mode::x0;
  }
  else if (mode == "ones")
  {
    r.mode = CRecipe::Mode::ones;
  }
  else if (mode == "explicit")
  {
    r.mode = CRecipe::Mode::explicit_values;
    r.values = parse_cvector(j.at("values"), "solver.c.values");
  }
  else
  {
    throw ConfigError("config: solver.c.mode must be x0|ones|explicit");
  }
  return r;
}

SolverSpec parse_solver(const json &j)
{
  require_keys(j, "solver",
               {"variant", "mu0", "sigma", "x0", "c", "tol_residual", "max_iter", "qn2_w_mode",
                "w_sigma", "reference"});
  SolverSpec s;
  const std::string variant = j.at("variant").get<std::string>();
  if (variant == "QN1")
  {
    s.variant = Variant::qn1;
  }
  else if (variant == "QN2")
  {
    s.variant = Variant::qn2;
  }
  else if (variant == "QN3")
  {
    s.variant = Variant::qn3;
  }
  else if (variant == "QN4")
  {
    s.variant = Variant::qn4;
  }
  else
  {
    throw ConfigError("config: solver.variant must be QN1|QN2|QN3|QN4");
  }
  s.mu0 = parse_anchored(j.at("mu0"), "solver.mu0");
  if (j.contains("sigma"))
  {
    s.sigma = parse_anchored(j.at("sigma"), "solver.sigma");
  }
  if (j.contains("x0"))
  {
    s.x0 = parse_x0(j.at("x0"));
  }
  if (j.contains("c"))
  {
    s.c = parse_c(j.at("c"));
  }
  if (j.contains("tol_residual"))
  {
    s.tol_residual = parse_real(j.at("tol_residual"), "solver.tol_residual");
  }
  if (j.contains("max_iter"))
  {
    s.max_iter = j.at("max_iter").get<int>();
  }
  if (j.contains("qn2_w_mode"))
  {
    const std::string mode = j.at("qn2_w_mode").get<std::string>();
    if (mode == "derive_w_from_c")
    {
      s.w_mode = Qn2WMode::derive_w_from_c;
    }
    else if (mode == "fix_w_choose_c")
    {
      s.w_mode = Qn2WMode::fix_w_choose_c;
    }
    else
    {
      throw ConfigError("config: solver.qn2_w_mode must be derive_w_from_c|fix_w_choose_c");
    }
  }
  if (j.contains("w_sigma"))
  {
    s.w_sigma = parse_cvector(j.at("w_sigma"), "solver.w_sigma");
  }
  if (j.contains("reference"))
  {
    const std::string ref = j.at("reference").get<std::string>();
    if (ref == "qn4")
    {
      s.reference = SolverSpec::Reference::qn4;
    }
    else if (ref == "spectrum")
    {
      s.reference = SolverSpec::Reference::spectrum;
    }
    else if (ref == "none")
    {
      s.reference = SolverSpec::Reference::none;
    }
    else
    {
      throw ConfigError("config: solver.reference must be qn4|spectrum|none");
    }
  }
  return s;
}

SweepSpec parse_sweep(const json &j)
{
  require_keys(j, "sweep", {"parameter", "values", "slope_fit_count"});
  SweepSpec s;
  const std::string parameter = j.at("parameter").get<std::string>();
  if (parameter == "radius")
  {
    s.parameter = SweepSpec::Parameter::radius;
  }
  else if (parameter == "shift_delta")
  {
    s.parameter = SweepSpec::Parameter::shift_delta;
  }
  else
  {
    throw ConfigError("config: sweep.parameter must be radius|shift_delta");
  }
  s.values = parse_value_list(j.at("values"), "sweep.values");
  if (j.contains("slope_fit_count"))
  {
    s.slope_fit_count = j.at("slope_fit_count").get<int>();
  }
  return s;
}

ContourSpec parse_contour(const json &j)
{
  require_keys(j, "contour", {"center", "radius", "nodes", "mode", "probes", "decay_radii"});
  ContourSpec c;
  c.center = parse_complex(j.at("center"), "contour.center");
  c.radius = parse_real(j.at("radius"), "contour.radius");
  if (j.contains("nodes"))
  {
    c.nodes = j.at("nodes").get<int>();
  }
  if (j.contains("mode"))
  {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "residual")
    {
      c.mode = RemainderMode::residual;
    }
    else if (mode == "integral")
    {
      c.mode = RemainderMode::integral;
    }
    else
    {
      throw ConfigError("config: contour.mode must be residual|integral");
    }
  }
  if (j.contains("probes"))
  {
    const json &p = j.at("probes");
    if (p.is_array())
    {
      const Vector v = parse_cvector(p, "contour.probes");
      c.probes.explicit_probes.assign(v.data(), v.data() + v.size());
    }
    else
    {
      require_keys(p, "contour.probes", {"count", "seed", "scale"});
      if (p.contains("count"))
      {
        c.probes.count = p.at("count").get<int>();
      }
      if (p.contains("seed"))
      {
        c.probes.seed = p.at("seed").get<std::uint64_t>();
      }
      if (p.contains("scale"))
      {
        c.probes.scale = parse_real(p.at("scale"), "contour.probes.scale");
      }
    }
  }
  if (j.contains("decay_radii"))
  {
    c.decay_radii = parse_value_list(j.at("decay_radii"), "contour.decay_radii");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Shared resolution steps
// ---------------------------------------------------------------------------

SpectrumReport resolve_spectrum(const NepProblem &problem, const ExperimentConfig &config)
{
  if (!config.known_eigenvalues.empty())
  {
    SpectrumReport report;
    report.method = "known_eigenvalues";
    for (Complex guess : config.known_eigenvalues)
    {
      Eigentriplet t = triplet_from_eigenvalue(problem, guess);
      const Complex pairing = t.left_vec.dot(problem.derivative(t.lambda) * t.right_vec);
      report.defective.push_back(std::abs(pairing) <
                                 1e-14 * (1.0 + problem.derivative(t.lambda).norm()));
      report.triplets.push_back(std::move(t));
    }
    return report;
  }
  return enumerate_spectrum(problem);
}

Index select_target(const SpectrumReport &spectrum, const TargetSelect &target)
{
  if (spectrum.triplets.empty())
  {
    throw ConfigError("target selection on an empty spectrum");
  }
  const auto count = static_cast<Index>(spectrum.triplets.size());
  switch (target.kind)
  {
    case TargetSelect::Kind::rightmost:
      return count - 1;  // report is sorted by (re, im)
    case TargetSelect::Kind::leftmost:
      return 0;
    case TargetSelect::Kind::index:
      if (target.index < 0 || target.index >= count)
      {
        throw ConfigError("target.index out of range");
      }
      return target.index;
    case TargetSelect::Kind::nearest:
    {
      Index best = 0;
      double dist = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < count; ++i)
      {
        const double d = std::abs(spectrum.triplets[static_cast<size_t>(i)].lambda - target.value);
        if (d < dist)
        {
          dist = d;
          best = i;
        }
      }
      return best;
    }
  }
  throw ConfigError("invalid target selection");
}

Vector resolve_x0(const VectorRecipe &recipe, Index n, const Eigentriplet *reference)
{
  switch (recipe.mode)
  {
    case VectorRecipe::Mode::ones:
      return Vector::Ones(n);
    case VectorRecipe::Mode::reference_plus_ones:
      if (!reference)
      {
        throw ConfigError("x0 recipe reference_plus_ones needs a reference eigenpair");
      }
      return canonical_eigenvector(reference->right_vec) + recipe.a * Vector::Ones(n);
    case VectorRecipe::Mode::random:
    {
      DeterministicRng rng(recipe.seed);
      return rng.complex_vector(n);
    }
    case VectorRecipe::Mode::explicit_values:
      if (recipe.values.size() != n)
      {
        throw ConfigError("explicit x0 has the wrong dimension");
      }
      return recipe.values;
  }
  throw ConfigError("invalid x0 recipe");
}

Vector resolve_c(const CRecipe &recipe, const Vector &x0)
{
  switch (recipe.mode)
  {
    case CRecipe::Mode::x0:
      return x0;
    case CRecipe::Mode::ones:
      return Vector::Ones(x0.size());
    case CRecipe::Mode::explicit_values:
      if (recipe.values.size() != x0.size())
      {
        throw ConfigError("explicit c has the wrong dimension");
      }
      return recipe.values;
  }
  throw ConfigError("invalid c recipe");
}

// Error oracle per the QN4 route: iterate from the configured start, then polish the
// limit with Newton steps on the augmented system. The relative residual target stays
// a shade above the double-precision evaluation floor of ||M(mu) x||.
Eigentriplet qn4_reference(const NepProblem &problem, Complex mu0)
{
  SolverConfig ref;
  ref.variant = Variant::qn4;
  ref.sigma = mu0;
  ref.mu0 = mu0;
  // Unit-norm c keeps ||x_k|| near one, so the relative residual target stays above
  // the evaluation floor of ||M(mu) x||.
  ref.c = Vector::Ones(problem.dimension()).normalized();
  ref.x0 = Vector::Ones(problem.dimension());
  ref.tol_residual = 1e-13;
  ref.max_iter = 50;
  const IterationTrace trace = run(problem, ref);
  const IterationRecord &last = trace.records.back();
  // A run stalled on the residual round-off floor is still a valid oracle seed; the
  // Newton polish below restores full eigenvalue accuracy either way.
  const bool usable = trace.status == TerminationStatus::converged ||
                      (trace.status == TerminationStatus::max_iter &&
                       last.resid_norm <= 1e-8 * (1.0 + last.x.norm()));
  if (!usable)
  {
    throw ConfigError("reference QN4 run did not converge (status " +
                      to_string(trace.status) + ")");
  }
  return triplet_from_eigenvalue(problem, last.mu);
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

class CsvWriter
{
public:
  CsvWriter(std::string schema, std::string header)
  {
    text_ = "# schema: " + std::move(schema) + "\n" + std::move(header) + "\n";
  }

  void row(const std::vector<std::string> &cells)
  {
    for (size_t i = 0; i < cells.size(); ++i)
    {
      if (i > 0)
      {
        text_ += ',';
      }
      text_ += cells[i];
    }
    text_ += '\n';
  }

  void write(const std::string &path) const
  {
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
      throw ConfigError("cannot open output file '" + path + "'");
    }
    out << text_;
  }

private:
  std::string text_;
};

std::string blank()
{
  return {};
}

std::string fmt(std::optional<double> v)
{
  return v ? format_double(*v) : blank();
}

std::string resolve_output(const ExperimentConfig &config, const CommandOptions &options)
{
  if (options.out)
  {
    return *options.out;
  }
  if (config.output)
  {
    return *config.output;
  }
  throw ConfigError("no output path (set \"output\" in the config or pass --out)");
}

int threads_from_env()
{
  const char *env = std::getenv("NEPQN_THREADS");
  if (!env)
  {
    return 1;
  }
  const int n = std::atoi(env);
  return std::max(1, n);
}

// Least-squares slope of log10(y) against log10(x).
std::optional<double> loglog_slope(const std::vector<double> &x, const std::vector<double> &y)
{
  if (x.size() < 2)
  {
    return std::nullopt;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(x.size());
  for (size_t i = 0; i < x.size(); ++i)
  {
    const double lx = std::log10(x[i]);
    const double ly = std::log10(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

std::string format_double(double value)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

Complex AnchoredValue::resolve(std::optional<Complex> target) const
{
  if (!relative_to_target)
  {
    return value;
  }
  if (!target)
  {
    throw ConfigError("target_plus needs a resolved target eigenvalue "
                      "(use reference \"spectrum\" and a target selector)");
  }
  return *target + value;
}

NepProblem ProblemSpec::build() const
{
  if (name == "loaded_string")
  {
    return loaded_string(n, c_scale);
  }
  if (name == "circle_quadratic")
  {
    return circle_quadratic(radius);
  }
  if (name == "counterexample")
  {
    return counterexample(f);
  }
  if (name == "linear")
  {
    return linear(matrix);
  }
  if (name == "polynomial")
  {
    return NepProblem::polynomial(coeffs);
  }
  if (name == "rational")
  {
    return NepProblem::rational(coeffs, terms);
  }
  throw ConfigError("unknown problem name '" + name + "'");
}

NepProblem ProblemSpec::build_with_radius(double r) const
{
  if (name != "circle_quadratic")
  {
    throw ConfigError("radius sweeps need the circle_quadratic problem");
  }
  return circle_quadratic(r);
}

ExperimentConfig ExperimentConfig::load(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_json_text(buffer.str());
}

ExperimentConfig ExperimentConfig::parse_json_text(const std::string &text)
{
  json j;
  try
  {
    j = json::parse(text);
  }
  catch (const json::parse_error &e)
  {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  require_keys(j, "<root>",
               {"problem", "target", "solver", "analysis", "sweep", "contour",
                "known_eigenvalues", "output"});
  ExperimentConfig config;
  if (!j.contains("problem"))
  {
    throw ConfigError("config: missing 'problem'");
  }
  config.problem = parse_problem(j.at("problem"));
  if (j.contains("target"))
  {
    config.target = parse_target(j.at("target"));
  }
  if (j.contains("solver"))
  {
    config.solver = parse_solver(j.at("solver"));
  }
  if (j.contains("analysis"))
  {
    require_keys(j.at("analysis"), "analysis", {"emit_a_priori", "remainder_norm"});
    if (j.at("analysis").contains("emit_a_priori"))
    {
      config.analysis.emit_a_priori = j.at("analysis").at("emit_a_priori").get<bool>();
    }
    if (j.at("analysis").contains("remainder_norm"))
    {
      config.analysis.remainder_norm =
          parse_real(j.at("analysis").at("remainder_norm"), "analysis.remainder_norm");
    }
  }
  if (j.contains("sweep"))
  {
    config.sweep = parse_sweep(j.at("sweep"));
  }
  if (j.contains("contour"))
  {
    config.contour = parse_contour(j.at("contour"));
  }
  if (j.contains("known_eigenvalues"))
  {
    const Vector v = parse_cvector(j.at("known_eigenvalues"), "known_eigenvalues");
    config.known_eigenvalues.assign(v.data(), v.data() + v.size());
  }
  if (j.contains("output"))
  {
    config.output = j.at("output").get<std::string>();
  }
  return config;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

int cmd_solve(const ExperimentConfig &config, const CommandOptions &options, std::ostream &log)
{
  if (!config.solver)
  {
    throw ConfigError("solve needs a 'solver' section");
  }
  const SolverSpec &spec = *config.solver;
  const NepProblem problem = config.problem.build();
  const Index n = problem.dimension();

  // Resolve the target eigenvalue / reference pair.
  std::optional<Eigentriplet> reference;
  std::optional<Complex> target_lambda;
  if (spec.reference == SolverSpec::Reference::spectrum)
  {
    const SpectrumReport spectrum = resolve_spectrum(problem, config);
    const TargetSelect target = config.target.value_or(TargetSelect{});
    reference = spectrum.triplets[static_cast<size_t>(select_target(spectrum, target))];
    target_lambda = reference->lambda;
  }
  const Complex mu0 = spec.mu0.resolve(target_lambda);
  if (spec.reference == SolverSpec::Reference::qn4)
  {
    reference = qn4_reference(problem, mu0);
    target_lambda = reference->lambda;
  }

  SolverConfig solver;
  solver.variant = spec.variant;
  solver.mu0 = mu0;
  solver.sigma = spec.sigma ? spec.sigma->resolve(target_lambda) : mu0;
  solver.x0 = resolve_x0(spec.x0, n, reference ? &*reference : nullptr);
  solver.c = resolve_c(spec.c, solver.x0);
  solver.tol_residual = spec.tol_residual;
  solver.max_iter = spec.max_iter;
  solver.qn2_w_mode = spec.w_mode;
  solver.w_sigma = spec.w_sigma;
  solver.reference = reference;

  const IterationTrace trace = run(problem, solver);

  CsvWriter csv("nepqn-trace-v1", "k,mu_re,mu_im,delta_mu_abs,resid_norm,err_norm,rho_est,r_k_norm");
  for (const auto &rec : trace.records)
  {
    csv.row({std::to_string(rec.k), format_double(rec.mu.real()), format_double(rec.mu.imag()),
             rec.delta_mu ? format_double(std::abs(*rec.delta_mu)) : blank(),
             format_double(rec.resid_norm), fmt(rec.err_norm), fmt(rec.rho_est),
             fmt(rec.r_k_norm)});
  }
  const std::string out = resolve_output(config, options);
  csv.write(out);

  if (!options.quiet)
  {
    log << "variant: " << to_string(spec.variant) << "\n"
        << "status: " << to_string(trace.status) << "\n"
        << "iterations: " << trace.records.size() - 1 << "\n"
        << "final_residual: " << format_double(trace.records.back().resid_norm) << "\n";
    if (!trace.breakdown_reason.empty())
    {
      log << "breakdown_reason: " << trace.breakdown_reason << "\n";
    }
    if (spec.variant == Variant::qn4 && reference)
    {
      // Least-squares fit of log|mu_{k+1} - lambda| against log|mu_k - lambda| over
      // the pre-floor iterations.
      std::vector<double> errors;
      const double floor = 1e-13 * (1.0 + std::abs(reference->lambda));
      for (const auto &rec : trace.records)
      {
        const double err = std::abs(rec.mu - reference->lambda);
        if (err > floor)
        {
          errors.push_back(err);
        }
      }
      if (errors.size() >= 3)
      {
        std::vector<double> xs(errors.begin(), errors.end() - 1);
        std::vector<double> ys(errors.begin() + 1, errors.end());
        if (const auto order = loglog_slope(xs, ys))
        {
          log << "fitted_order: " << format_double(*order) << "\n";
        }
      }
    }
    if (config.analysis.emit_a_priori && reference)
    {
      const Vector x0n = solver.x0 / solver.c.dot(solver.x0);
      log << "rho_A1: "
          << format_double(
                 matrix_a1(problem, solver.sigma, x0n, solver.c, *reference).spectral_radius())
          << "\n"
          << "rho_A2: "
          << format_double(matrix_a2(problem, solver.sigma, solver.c, *reference).spectral_radius())
          << "\n"
          << "rho_B: "
          << format_double(matrix_b(problem, solver.sigma, solver.c, *reference).spectral_radius())
          << "\n";
    }
    log << "csv: " << out << "\n";
  }

  switch (trace.status)
  {
    case TerminationStatus::converged:
      return kExitOk;
    case TerminationStatus::breakdown:
      return kExitBreakdown;
    case TerminationStatus::max_iter:
      return kExitMaxIter;
  }
  return kExitError;
}

// ---------------------------------------------------------------------------
// factors
// ---------------------------------------------------------------------------

int cmd_factors(const ExperimentConfig &config, const CommandOptions &options, std::ostream &log)
{
  if (!config.solver)
  {
    throw ConfigError("factors needs a 'solver' section (sigma and the x0/c recipes)");
  }
  const SolverSpec &spec = *config.solver;
  const NepProblem problem = config.problem.build();
  const Index n = problem.dimension();

  const SpectrumReport spectrum = resolve_spectrum(problem, config);
  const TargetSelect target = config.target.value_or(TargetSelect{});
  const Index t = select_target(spectrum, target);
  const Eigentriplet &triplet = spectrum.triplets[static_cast<size_t>(t)];

  const Complex sigma = (spec.sigma ? *spec.sigma : spec.mu0).resolve(triplet.lambda);
  const Vector x0 = resolve_x0(spec.x0, n, &triplet);
  const Vector c = resolve_c(spec.c, x0);
  const Vector x0n = x0 / c.dot(x0);

  const double rho_a1 = matrix_a1(problem, sigma, x0n, c, triplet).spectral_radius();
  const double rho_a2 = matrix_a2(problem, sigma, c, triplet).spectral_radius();
  const double rho_b = matrix_b(problem, sigma, c, triplet).spectral_radius();
  const double bound =
      clustering_bound(problem, sigma, c, spectrum, t, config.analysis.remainder_norm);
  const ConditionReport cond = condition_numbers(problem, spectrum, sigma);

  const double equiv_rel_err = std::abs(rho_a2 - rho_b) / rho_b;
  const bool equiv_ok = equiv_rel_err <= 1e-8;
  const bool bound_ok = bound >= rho_b * (1.0 - 1e-10);

  CsvWriter csv("nepqn-factors-v1",
                "i,lambda_re,lambda_im,kappa,defective,shift_dist,rho_A1,rho_A2,rho_B,"
                "cluster_bound,equiv_rel_err,equiv_ok,bound_ok");
  for (size_t i = 0; i < spectrum.triplets.size(); ++i)
  {
    const Complex lambda = spectrum.triplets[i].lambda;
    csv.row({std::to_string(i), format_double(lambda.real()), format_double(lambda.imag()),
             format_double(cond.kappa[i]), cond.defective[i] ? "1" : "0",
             format_double(cond.shift_distance[i]), format_double(rho_a1),
             format_double(rho_a2), format_double(rho_b), format_double(bound),
             format_double(equiv_rel_err), equiv_ok ? "1" : "0", bound_ok ? "1" : "0"});
  }
  const std::string out = resolve_output(config, options);
  csv.write(out);

  if (!options.quiet)
  {
    log << "target: " << format_double(triplet.lambda.real()) << " + "
        << format_double(triplet.lambda.imag()) << "i\n"
        << "rho_A1: " << format_double(rho_a1) << "\n"
        << "rho_A2: " << format_double(rho_a2) << "\n"
        << "rho_B: " << format_double(rho_b) << "\n"
        << "cluster_bound: " << format_double(bound) << "\n"
        << "csv: " << out << "\n";
  }
  return (equiv_ok && bound_ok) ? kExitOk : kExitAssertionFailed;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

int cmd_sweep(const ExperimentConfig &config, const CommandOptions &options, std::ostream &log)
{
  if (!config.sweep)
  {
    throw ConfigError("sweep needs a 'sweep' section");
  }
  if (!config.solver)
  {
    throw ConfigError("sweep needs a 'solver' section (sigma and the x0/c recipes)");
  }
  const SweepSpec &sweep = *config.sweep;
  const SolverSpec &spec = *config.solver;
  const TargetSelect target = config.target.value_or(TargetSelect{});

  const auto count = sweep.values.size();
  std::vector<double> rho(count, 0.0);
  std::vector<std::string> errors(count);

  auto eval_point = [&](size_t i) {
    try
    {
      if (sweep.parameter == SweepSpec::Parameter::radius)
      {
        const NepProblem problem = config.problem.build_with_radius(sweep.values[i]);
        const SpectrumReport spectrum = resolve_spectrum(problem, config);
        const Index t = select_target(spectrum, target);
        const Eigentriplet &triplet = spectrum.triplets[static_cast<size_t>(t)];
        const Complex sigma = (spec.sigma ? *spec.sigma : spec.mu0).resolve(triplet.lambda);
        const Vector x0 = resolve_x0(spec.x0, problem.dimension(), &triplet);
        const Vector c = resolve_c(spec.c, x0);
        rho[i] = matrix_b(problem, sigma, c, triplet).spectral_radius();
      }
      else
      {
        const NepProblem problem = config.problem.build();
        const SpectrumReport spectrum = resolve_spectrum(problem, config);
        const Index t = select_target(spectrum, target);
        const Eigentriplet &triplet = spectrum.triplets[static_cast<size_t>(t)];
        const Complex sigma = triplet.lambda + sweep.values[i];
        const Vector x0 = resolve_x0(spec.x0, problem.dimension(), &triplet);
        const Vector c = resolve_c(spec.c, x0);
        rho[i] = matrix_b(problem, sigma, c, triplet).spectral_radius();
      }
    }
    catch (const std::exception &e)
    {
      errors[i] = e.what();
    }
  };

  const int threads = std::min<int>(threads_from_env(), static_cast<int>(count));
  if (threads <= 1)
  {
    for (size_t i = 0; i < count; ++i)
    {
      eval_point(i);
    }
  }
  else
  {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
    {
      pool.emplace_back([&, w]() {
        for (size_t i = static_cast<size_t>(w); i < count; i += static_cast<size_t>(threads))
        {
          eval_point(i);
        }
      });
    }
    for (auto &th : pool)
    {
      th.join();
    }
  }

  for (size_t i = 0; i < count; ++i)
  {
    if (!errors[i].empty())
    {
      throw NepError("sweep point " + std::to_string(i) + " failed: " + errors[i]);
    }
  }

  // Slope of log rho against log param over the largest slope_fit_count parameters.
  std::vector<size_t> order(count);
  for (size_t i = 0; i < count; ++i)
  {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return sweep.values[a] < sweep.values[b]; });
  const size_t fit_count = (sweep.slope_fit_count > 0)
                               ? std::min<size_t>(count, static_cast<size_t>(sweep.slope_fit_count))
                               : count;
  std::vector<double> fx, fy;
  for (size_t i = count - fit_count; i < count; ++i)
  {
    fx.push_back(sweep.values[order[i]]);
    fy.push_back(rho[order[i]]);
  }
  const std::optional<double> slope = loglog_slope(fx, fy);

  CsvWriter csv("nepqn-sweep-v1", "param,rho,slope");
  for (size_t i = 0; i < count; ++i)
  {
    csv.row({format_double(sweep.values[i]), format_double(rho[i]), fmt(slope)});
  }
  const std::string out = resolve_output(config, options);
  csv.write(out);

  if (!options.quiet)
  {
    log << "points: " << count << "\n";
    if (slope)
    {
      log << "slope: " << format_double(*slope) << "\n";
    }
    log << "csv: " << out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// keldysh
// ---------------------------------------------------------------------------

int cmd_keldysh(const ExperimentConfig &config, const CommandOptions &options, std::ostream &log)
{
  if (!config.contour)
  {
    throw ConfigError("keldysh needs a 'contour' section");
  }
  const NepProblem problem = config.problem.build();
  const Index n = problem.dimension();

  ContourSpec spec = *config.contour;
  if (options.nodes)
  {
    spec.nodes = *options.nodes;
  }
  const SpectrumReport spectrum = resolve_spectrum(problem, config);
  const KeldyshDecomposition decomp =
      decompose(problem, Contour{spec.center, spec.radius, spec.nodes}, spectrum, spec.mode);
  const Contour &contour = decomp.contour;

  std::vector<Complex> probes = spec.probes.explicit_probes;
  if (probes.empty())
  {
    DeterministicRng rng(spec.probes.seed);
    for (int k = 0; k < spec.probes.count; ++k)
    {
      Complex z;
      int attempts = 0;
      for (;;)
      {
        z = contour.center + spec.probes.scale * contour.radius * rng.complex_in_box(1.0);
        const bool inside = std::abs(z - contour.center) <= spec.probes.scale * contour.radius;
        const bool clear = std::all_of(
            spectrum.triplets.begin(), spectrum.triplets.end(), [&](const Eigentriplet &t) {
              return std::abs(z - t.lambda) > 0.02 * contour.radius;
            });
        if (inside && clear)
        {
          break;
        }
        if (++attempts > 1000)
        {
          throw ConfigError("could not draw probes clear of the spectrum; "
                            "pass explicit contour.probes");
        }
      }
      probes.push_back(z);
    }
  }

  CsvWriter csv("nepqn-keldysh-v1",
                "kind,z_re,z_im,radius,identity_resid,pf_rel_err,remainder_norm,max_inv_norm,"
                "r12_re,r12_im,note");
  for (Complex z : probes)
  {
    const Matrix minv =
        problem.evaluate(z).partialPivLu().solve(Matrix::Identity(n, n));
    const Matrix pf = decomp.partial_fraction(z);
    const Matrix rem = decomp.remainder(z);
    const double minv_norm = spectral_norm(minv);
    const Matrix identity_gap = minv - pf - rem;
    csv.row({"probe", format_double(z.real()), format_double(z.imag()), blank(),
             format_double(spectral_norm(identity_gap) / minv_norm),
             format_double(spectral_norm(minv - pf) / minv_norm),
             format_double(spectral_norm(rem)), blank(),
             n >= 2 ? format_double(rem(0, 1).real()) : blank(),
             n >= 2 ? format_double(rem(0, 1).imag()) : blank(), blank()});
  }

  if (!spec.decay_radii.empty())
  {
    const auto table = remainder_decay(problem, contour.center, spec.decay_radii, probes,
                                       spec.nodes);
    for (const auto &row : table)
    {
      if (row.skipped)
      {
        csv.row({"decay_skipped", blank(), blank(), format_double(row.radius), blank(), blank(),
                 blank(), blank(), blank(), blank(), row.note});
        continue;
      }
      for (size_t p = 0; p < probes.size(); ++p)
      {
        csv.row({"decay", format_double(probes[p].real()), format_double(probes[p].imag()),
                 format_double(row.radius), blank(), blank(),
                 std::isnan(row.remainder_norms[p]) ? blank()
                                                    : format_double(row.remainder_norms[p]),
                 format_double(row.max_inv_norm), blank(), blank(), blank()});
      }
    }
  }

  const std::string out = resolve_output(config, options);
  csv.write(out);

  if (!options.quiet)
  {
    log << "enclosed_eigenvalues: " << decomp.triplets.size() << "\n"
        << "nodes: " << contour.node_count << "\n"
        << "probes: " << probes.size() << "\n"
        << "csv: " << out << "\n";
  }
  return kExitOk;
}

}  // namespace nepqn
