#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lininf/cli.hpp"

namespace cli = lininf::cli;

int main(int argc, char** argv) {
  CLI::App app{"Approximate Bayesian inference by iterative Gaussian linearization"};
  app.require_subcommand(1);

  std::string file;
  bool json = false;
  bool full = false;
  cli::SolveFlags solve_flags;
  cli::SampleFlags sample_flags;
  double epsilon = 0.0;
  int max_iter = 0;

  auto* validate = app.add_subcommand("validate", "Parse and validate a model file");
  validate->add_option("file", file, "Model JSON file")->required();

  auto* solve = app.add_subcommand("solve", "Run the linear approximation");
  solve->add_option("file", file, "Model JSON file")->required();
  solve->add_flag("--json", json, "Emit JSON instead of a table");
  solve->add_flag("--full-precision", full, "Print 17 significant digits");
  auto* eps_opt = solve->add_option("--epsilon", epsilon, "Convergence threshold");
  auto* iter_opt = solve->add_option("--max-iter", max_iter, "Iteration cap");
  solve->add_flag("--no-pool", solve_flags.no_pool, "Condition on each evidence item separately");

  auto add_sampling = [&](CLI::App* sub) {
    sub->add_option("file", file, "Model JSON file")->required();
    sub->add_option("--samples", sample_flags.samples, "Monte Carlo draws")->required();
    sub->add_option("--seed", sample_flags.seed, "Random seed")->required();
    sub->add_option("--workers", sample_flags.workers, "Worker threads (0 = all cores)");
    sub->add_flag("--json", json, "Emit JSON instead of a table");
    sub->add_flag("--full-precision", full, "Print 17 significant digits");
  };
  auto* oracle = app.add_subcommand("oracle", "Importance-sampling reference posterior");
  add_sampling(oracle);
  auto* compare = app.add_subcommand("compare", "Approximation versus Monte Carlo");
  add_sampling(compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::kInputError;
  }

  if (*eps_opt) solve_flags.epsilon = epsilon;
  if (*iter_opt) solve_flags.max_iterations = max_iter;
  const cli::OutputOptions opt{json, full ? 17 : 6};

  return cli::with_model(file, std::cerr, [&](const lininf::ModelDocument& doc) {
    if (*validate) return cli::cmd_validate(doc, std::cout);
    if (*solve) return cli::cmd_solve(doc, solve_flags, opt, std::cout, std::cerr);
    if (*oracle) return cli::cmd_oracle(doc, sample_flags, opt, std::cout, std::cerr);
    return cli::cmd_compare(doc, sample_flags, opt, std::cout, std::cerr);
  });
}
