// Copyright (c) the nepqn developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nepqn/experiment.hpp"

int main(int argc, char **argv)
{
  CLI::App app{"Quasi-Newton solvers and Keldysh diagnostics for nonlinear eigenvalue "
               "problems M(lambda) v = 0"};
  app.require_subcommand(1);

  struct Args
  {
    std::string config;
    std::string out;
    int nodes = 0;
    bool quiet = false;
  };

  auto add_common = [](CLI::App *cmd, Args &args) {
    cmd->add_option("--config", args.config, "experiment config file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out, "output CSV path (overrides the config)");
    cmd->add_flag("--quiet", args.quiet, "suppress the summary on stdout");
  };

  Args solve_args, factors_args, sweep_args, keldysh_args;
  CLI::App *solve = app.add_subcommand("solve", "run one quasi-Newton solver, emit the trace");
  add_common(solve, solve_args);
  CLI::App *factors =
      app.add_subcommand("factors", "a-priori convergence factors and condition numbers");
  add_common(factors, factors_args);
  CLI::App *sweep = app.add_subcommand("sweep", "convergence factor over a parameter sweep");
  add_common(sweep, sweep_args);
  CLI::App *keldysh =
      app.add_subcommand("keldysh", "partial-fraction and contour-remainder checks");
  add_common(keldysh, keldysh_args);
  keldysh->add_option("--nodes", keldysh_args.nodes, "quadrature node count on the contour");

  CLI11_PARSE(app, argc, argv);

  try
  {
    auto run_command = [](const Args &args, auto &&command) {
      const nepqn::ExperimentConfig config = nepqn::ExperimentConfig::load(args.config);
      nepqn::CommandOptions options;
      if (!args.out.empty())
      {
        options.out = args.out;
      }
      if (args.nodes > 0)
      {
        options.nodes = args.nodes;
      }
      options.quiet = args.quiet;
      return command(config, options, std::cout);
    };

    if (solve->parsed())
    {
      return run_command(solve_args, nepqn::cmd_solve);
    }
    if (factors->parsed())
    {
      return run_command(factors_args, nepqn::cmd_factors);
    }
    if (sweep->parsed())
    {
      return run_command(sweep_args, nepqn::cmd_sweep);
    }
    if (keldysh->parsed())
    {
      return run_command(keldysh_args, nepqn::cmd_keldysh);
    }
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return nepqn::kExitError;
  }
  return nepqn::kExitError;
}
