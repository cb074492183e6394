#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rdg/game_spec.hpp"
#include "rdg/runner.hpp"

namespace {

struct CommonOptions {
  std::string spec_path;
  rdg::RunFlags flags;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool spec_required) {
  auto* positional = cmd->add_option("spec", opts.spec_path, "GameSpec JSON file");
  if (spec_required) positional->required();
  cmd->add_option("--workers", opts.flags.workers, "worker count for policy scans")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", opts.flags.seed, "PRNG seed");
  cmd->add_option("--tol-oracle", opts.flags.tol_oracle, "oracle gap tolerance");
  cmd->add_option("--tol-submart", opts.flags.tol_submart, "submartingale slack tolerance");
}

int dispatch(const std::string& command, const CommonOptions& opts) {
  std::optional<rdg::GameSpec> spec;
  if (!opts.spec_path.empty()) spec = rdg::load_spec_file(opts.spec_path);
  rdg::RunFlags flags = opts.flags;
  if (const char* env = std::getenv("RDG_MAX_NODES")) {
    try {
      flags.max_nodes_override = std::stoll(env);
    } catch (const std::exception&) {
      rdg::raise(rdg::ErrorCode::ValidationError, "RDG_MAX_NODES must be an integer");
    }
  }
  const rdg::Report report = rdg::run(command, spec, flags);
  std::cout << report.dump() << std::endl;
  return report.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rdg: robust Dynkin game solver and verification harness on scenario trees"};
  app.require_subcommand(1);

  CommonOptions solve_opts, oracle_opts, converge_opts, paste_opts, sde_opts, sweep_opts;

  auto* solve = app.add_subcommand("solve", "backward induction, optimal objects, reports");
  add_common(solve, solve_opts, true);
  solve->add_option("--dump-values", solve_opts.flags.dump_values,
                    "write per-node values to this CSV file");

  auto* oracle = app.add_subcommand("oracle", "exhaustive cross-check of the solver value");
  add_common(oracle, oracle_opts, true);
  oracle->add_flag("--all-orders", oracle_opts.flags.all_orders,
                   "also report every ordering of the three optimizations");

  auto* converge = app.add_subcommand("converge", "grid-restricted value table");
  add_common(converge, converge_opts, true);
  converge->add_option("--n-max", converge_opts.flags.n_max, "largest grid level");

  auto* paste = app.add_subcommand("paste-check", "random pasting closure and marginal checks");
  add_common(paste, paste_opts, true);
  paste_opts.flags.count = 100;
  paste->add_option("--count", paste_opts.flags.count, "number of random pastes");

  auto* sde = app.add_subcommand("sde-check", "increment scaling of the lattice generator");
  add_common(sde, sde_opts, true);

  auto* sweep = app.add_subcommand("sweep", "seeded random-instance property sweep");
  add_common(sweep, sweep_opts, false);
  sweep->add_option("--count", sweep_opts.flags.count, "number of random instances");
  sweep->add_option("--mode", sweep_opts.flags.mode_override,
                    "instance family: standard or triplet");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return dispatch("solve", solve_opts);
    if (oracle->parsed()) return dispatch("oracle", oracle_opts);
    if (converge->parsed()) return dispatch("converge", converge_opts);
    if (paste->parsed()) return dispatch("paste-check", paste_opts);
    if (sde->parsed()) return dispatch("sde-check", sde_opts);
    if (sweep->parsed()) return dispatch("sweep", sweep_opts);
  } catch (const rdg::Error& e) {
    nlohmann::ordered_json err{{"error", rdg::to_string(e.code())}, {"message", e.what()}};
    std::cerr << err.dump(2) << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << std::endl;
    return 3;
  }
  return 0;
}
