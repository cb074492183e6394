#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rdg/ambiguity.hpp"
#include "rdg/errors.hpp"
#include "rdg/game_spec.hpp"
#include "rdg/oracle.hpp"
#include "rdg/payoff.hpp"
#include "rdg/scenario_tree.hpp"
#include "rdg/sde_lattice.hpp"
#include "rdg/solver.hpp"
#include "rdg/stopping.hpp"

namespace rdg {

struct RunFlags {
  int workers = 1;
  std::uint64_t seed = 42;
  int n_max = 3;
  int count = 200;
  std::string dump_values;
  bool all_orders = false;
  std::optional<double> tol_oracle;
  std::optional<double> tol_submart;
  std::optional<std::string> mode_override;
  std::optional<std::int64_t> max_nodes_override;
};

/// Machine-readable run output. `results` and `tolerance_outcomes` are fully
/// deterministic for a fixed spec + seed + flags; only `wall_time_ms` varies.
struct Report {
  nlohmann::ordered_json json;
  bool ok = true;

  std::string dump(int indent = 2) const { return json.dump(indent); }
};

namespace detail {

inline std::string format_double(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline Report make_report(const std::string& command, const std::string& digest) {
  Report report;
  report.json["command"] = command;
  report.json["spec_digest"] = digest;
  report.json["results"] = nlohmann::ordered_json::object();
  report.json["tolerance_outcomes"] = nlohmann::ordered_json::object();
  return report;
}

/// Registers an assertion outcome; `pass` semantics are chosen by the caller
/// (upper-bounded gaps vs lower-bounded slacks).
inline void add_outcome(Report& report, const std::string& name, double value, double tol,
                        bool pass) {
  report.json["tolerance_outcomes"][name] = {
      {"value", value}, {"tolerance", tol}, {"pass", pass}};
  report.ok = report.ok && pass;
}

inline Tolerances effective_tolerances(const Tolerances& base, const RunFlags& flags) {
  Tolerances tol = base;
  if (flags.tol_oracle) tol.oracle = *flags.tol_oracle;
  if (flags.tol_submart) tol.submartingale = *flags.tol_submart;
  return tol;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t salt) {
  std::uint64_t h = seed + 0x9E3779B97F4A7C15ull * (index + 1) + salt;
  h ^= h >> 30;
  h *= 0xBF58476D1CE4E5B9ull;
  h ^= h >> 27;
  h *= 0x94D049BB133111EBull;
  h ^= h >> 31;
  return h;
}

inline int smallest_full_grid_level(int n_steps) {
  int level = 0;
  while ((1 << level) < n_steps) ++level;
  return level;
}

/// Product of chosen kernel weights on the edges strictly below `ancestor`
/// down to `descendant` — the conditional mass of the subtree path.
inline double product_below(const ScenarioTree& tree, const KernelMenu& menu,
                            const Policy& policy, NodeId ancestor, NodeId descendant) {
  double prod = 1.0;
  NodeId id = descendant;
  while (id != ancestor) {
    const Node& n = tree.node(id);
    const Node& p = tree.node(n.parent);
    const Kernel& k = menu.at(p.id)[static_cast<std::size_t>(
        policy.choice[static_cast<std::size_t>(p.id)])];
    std::size_t pos = 0;
    while (p.children[pos] != id) ++pos;
    prod *= k.weights[pos];
    id = p.id;
  }
  return prod;
}

}  // namespace detail

/// Seeded random instance for property sweeps: N in 1..3, branching 2..3,
/// per-node menus of up to three kernels, table payoffs in [-5, 5] with L <= U
/// (equal at the leaves in triplet mode). Menu sizes are thinned from the
/// deepest nodes up until the exhaustive scans fit a fixed work budget.
inline GameInstance random_instance(std::uint64_t seed, std::uint64_t index, Mode mode) {
  std::mt19937_64 rng(detail::mix_seed(seed, index, 0x5eed));
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto pick_int = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };

  GameInstance inst;
  inst.mode = mode;
  inst.digest = "sweep-" + std::to_string(seed) + "-" + std::to_string(index);

  const int n_steps = pick_int(1, 3);
  const int branching = pick_int(2, 3);
  const std::vector<double> increments =
      branching == 2 ? std::vector<double>{1.0, -1.0} : std::vector<double>{1.0, 0.0, -1.0};
  inst.tree = build_tree(TimeGrid{1.0, n_steps}, additive_branching(increments));

  std::vector<NodeId> decision_nodes;
  for (const Node& n : inst.tree.nodes)
    if (!inst.tree.is_leaf(n.id)) decision_nodes.push_back(n.id);

  std::vector<int> menu_sizes(decision_nodes.size());
  for (auto& s : menu_sizes) s = pick_int(1, 3);

  const double rule_count = static_cast<double>(
      count_stopping_rules(inst.tree, all_depths_eligible(n_steps),
                           std::numeric_limits<std::uint64_t>::max() / 2));
  const double node_count = static_cast<double>(inst.tree.node_count());
  constexpr double work_budget = 1e6;
  auto scan_work = [&]() {
    double policies = 1.0;
    for (int s : menu_sizes) policies *= s;
    return policies * rule_count * node_count;
  };
  for (auto it = menu_sizes.rbegin(); it != menu_sizes.rend() && scan_work() > work_budget;
       ++it)
    *it = 1;

  inst.menu.by_node.assign(inst.tree.nodes.size(), {});
  for (std::size_t d = 0; d < decision_nodes.size(); ++d) {
    const Node& n = inst.tree.node(decision_nodes[d]);
    auto& kernels = inst.menu.by_node[static_cast<std::size_t>(n.id)];
    for (int k = 0; k < menu_sizes[d]; ++k) {
      Kernel kern;
      kern.label = k;
      kern.weights.resize(n.children.size());
      for (auto& w : kern.weights) w = uniform(0.01, 1.0);
      if (n.children.size() >= 2 && uniform(0.0, 1.0) < 0.15)
        kern.weights[static_cast<std::size_t>(
            pick_int(0, static_cast<int>(n.children.size()) - 1))] = 0.0;
      double sum = 0.0;
      for (double w : kern.weights) sum += w;
      for (auto& w : kern.weights) w /= sum;
      kernels.push_back(std::move(kern));
    }
  }

  inst.payoff.kind = PayoffKind::table;
  inst.payoff.has_g_table = mode == Mode::standard;
  for (const Node& n : inst.tree.nodes) {
    const bool leaf = inst.tree.is_leaf(n.id);
    if (leaf && mode == Mode::triplet) {
      const double c = uniform(-5.0, 5.0);
      inst.payoff.l_table[n.id] = c;
      inst.payoff.u_table[n.id] = c;
    } else {
      const double a = uniform(-5.0, 5.0);
      const double b = uniform(-5.0, 5.0);
      inst.payoff.l_table[n.id] = std::min(a, b);
      inst.payoff.u_table[n.id] = std::max(a, b);
    }
    if (mode == Mode::standard)
      inst.payoff.g_table[n.id] = leaf ? 0.0 : uniform(-1.0, 1.0);
  }

  validate_menu(inst.tree, inst.menu);
  validate_payoff(inst.payoff, inst.tree, mode == Mode::triplet, inst.m0);
  return inst;
}

inline StoppingRegion random_region(const ScenarioTree& tree, std::mt19937_64& rng,
                                    double density = 0.3) {
  StoppingRegion region = empty_region(tree);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (auto& m : region.member) m = coin(rng) < density ? 1 : 0;
  return region;
}

// ---------------------------------------------------------------------------
// solve

inline Report run_solve(const GameInstance& inst, const RunFlags& flags) {
  Report report = detail::make_report("solve", inst.digest);
  const Tolerances tol = detail::effective_tolerances(inst.tolerances, flags);
  const double inf = std::numeric_limits<double>::infinity();

  const double bound_slack = check_payoff_bound(inst.payoff, inst.tree, inf);
  const GameSolution sol = backward_induction(inst.tree, inst.payoff, inst.menu, tol.region);
  const StoppingRegion tau = extract_tau_star(inst.tree, sol);
  const StoppingRegion gamma = extract_gamma_star(inst.tree, sol);
  const Policy p_star = extract_p_star(inst.tree, sol);
  const double submart =
      submartingale_slack(inst.tree, inst.menu, sol, empty_region(inst.tree), true);
  const double post_worst =
      submartingale_slack(inst.tree, inst.menu, sol, empty_region(inst.tree), false);

  const int n_steps = inst.tree.grid.steps;
  std::vector<std::int64_t> tau_hist(static_cast<std::size_t>(n_steps) + 1, 0);
  std::vector<std::int64_t> gamma_hist(static_cast<std::size_t>(n_steps) + 1, 0);
  for (NodeId leaf : inst.tree.leaves()) {
    ++tau_hist[static_cast<std::size_t>(stop_depth_along(inst.tree, tau, leaf))];
    ++gamma_hist[static_cast<std::size_t>(stop_depth_along(inst.tree, gamma, leaf))];
  }

  auto& results = report.json["results"];
  results["V0"] = sol.value_at_root();
  results["tau_star_depth_histogram"] = tau_hist;
  results["gamma_star_depth_histogram"] = gamma_hist;
  nlohmann::ordered_json policy_json = nlohmann::ordered_json::object();
  for (const Node& n : inst.tree.nodes)
    if (!inst.tree.is_leaf(n.id))
      policy_json[std::to_string(n.id)] =
          p_star.choice[static_cast<std::size_t>(n.id)];
  results["p_star"] = std::move(policy_json);
  results["submartingale_worst"] = submart;
  results["submartingale_post_tau_star_worst"] = post_worst;  // reported, never asserted

  if (!flags.dump_values.empty()) {
    std::ofstream out(flags.dump_values);
    if (!out) raise(ErrorCode::ValidationError, "cannot write '" + flags.dump_values + "'");
    out << "node_id,depth,L,U,g,cont,v,tau_star,gamma_star\n";
    for (const Node& n : inst.tree.nodes) {
      const auto i = static_cast<std::size_t>(n.id);
      out << n.id << ',' << n.depth << ',' << detail::format_double(sol.l[i]) << ','
          << detail::format_double(sol.u[i]) << ',' << detail::format_double(sol.g[i]) << ','
          << detail::format_double(sol.cont[i]) << ',' << detail::format_double(sol.v[i]) << ','
          << int(tau.member[i]) << ',' << int(gamma.member[i]) << '\n';
    }
    results["dump_values_path"] = flags.dump_values;
  }

  detail::add_outcome(report, "payoff_bound_slack", bound_slack, tol.payoff_bound,
                      bound_slack <= tol.payoff_bound);
  detail::add_outcome(report, "submartingale_worst", submart, tol.submartingale,
                      submart >= -tol.submartingale);
  return report;
}

// ---------------------------------------------------------------------------
// oracle

inline Report run_oracle(const GameInstance& inst, const RunFlags& flags) {
  Report report = detail::make_report("oracle", inst.digest);
  const Tolerances tol = detail::effective_tolerances(inst.tolerances, flags);
  const double inf = std::numeric_limits<double>::infinity();
  const OracleCaps caps = inst.caps.oracle();

  const OracleCounts counts =
      oracle_counts(inst.tree, inst.menu, all_depths_eligible(inst.tree.grid.steps), caps);
  const double lower = lower_value_bruteforce(inst.tree, inst.payoff, inst.menu, caps);
  const double upper = upper_value_bruteforce(inst.tree, inst.payoff, inst.menu, caps, nullptr,
                                              flags.workers);
  const GameSolution sol = backward_induction(inst.tree, inst.payoff, inst.menu, tol.region);
  const double v0 = sol.value_at_root();
  const double coincidence =
      std::max({std::abs(lower - upper), std::abs(lower - v0), std::abs(upper - v0)});
  const double tau_gap =
      verify_tau_star(inst.tree, inst.payoff, inst.menu, extract_tau_star(inst.tree, sol), inf);
  const SaddleReport saddle =
      verify_saddle(inst.tree, inst.payoff, inst.menu, extract_tau_star(inst.tree, sol),
                    extract_gamma_star(inst.tree, sol), extract_p_star(inst.tree, sol), caps, inf);

  auto& results = report.json["results"];
  results["lower"] = lower;
  results["upper"] = upper;
  results["solver_V0"] = v0;
  results["coincidence_gap"] = coincidence;
  results["tau_star_gap"] = tau_gap;
  results["saddle_value"] = saddle.value;
  results["saddle_dev"] = saddle.max_dev;
  results["counts"] = {{"stopping_times", counts.stopping_times},
                       {"gamma_times", counts.gamma_times},
                       {"policies", counts.policies}};
  if (flags.all_orders) {
    nlohmann::ordered_json orders = nlohmann::ordered_json::object();
    for (const auto& [label, value] :
         ordering_values(inst.tree, inst.payoff, inst.menu, caps, flags.workers))
      orders[label] = value;
    results["orderings"] = std::move(orders);
  }

  detail::add_outcome(report, "coincidence_gap", coincidence, tol.oracle,
                      coincidence <= tol.oracle);
  detail::add_outcome(report, "tau_star_gap", tau_gap, tol.oracle, tau_gap <= tol.oracle);
  detail::add_outcome(report, "saddle_dev", saddle.max_dev, tol.oracle,
                      saddle.max_dev <= tol.oracle);
  return report;
}

// ---------------------------------------------------------------------------
// converge

inline Report run_converge(const GameInstance& inst, const RunFlags& flags) {
  Report report = detail::make_report("converge", inst.digest);
  const Tolerances tol = detail::effective_tolerances(inst.tolerances, flags);
  const int n_full = detail::smallest_full_grid_level(inst.tree.grid.steps);
  const int n_max = std::max(flags.n_max, n_full);
  const auto rows = convergence_report(inst.tree, inst.payoff, inst.menu, n_max);
  const double v_full = backward_induction(inst.tree, inst.payoff, inst.menu).value_at_root();

  auto& results = report.json["results"];
  results["V_bar_0"] = v_full;
  auto arr = nlohmann::ordered_json::array();
  double min_gap = std::numeric_limits<double>::infinity();
  double worst_monotone = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    arr.push_back({{"n", rows[i].level}, {"Vn0", rows[i].v0}, {"gap", rows[i].gap}});
    min_gap = std::min(min_gap, rows[i].gap);
    if (i + 1 < rows.size())
      worst_monotone = std::max(worst_monotone, rows[i + 1].gap - rows[i].gap);
  }
  results["rows"] = std::move(arr);
  const double full_gap = std::abs(rows[static_cast<std::size_t>(n_full)].gap);
  results["full_grid_level"] = n_full;

  detail::add_outcome(report, "gap_nonnegative", min_gap, tol.oracle, min_gap >= -tol.oracle);
  detail::add_outcome(report, "gap_nonincreasing", worst_monotone, tol.oracle,
                      worst_monotone <= tol.oracle);
  detail::add_outcome(report, "full_grid_gap", full_gap, tol.region, full_gap <= tol.region);
  return report;
}

// ---------------------------------------------------------------------------
// paste-check

struct PasteStats {
  int pastes = 0;
  bool closure_ok = true;
  double worst_marginal_gap = 0.0;
  double worst_conditional_gap = 0.0;
  double worst_formula_gap = 0.0;
};

/// Random pastes on one instance: patches replace the conditional behavior on
/// disjoint depth-s node sets. The pasted policy must remain valid, keep the
/// base marginals through depth s, follow the patches below the patched nodes,
/// and match the leafwise composition of the two measures.
inline PasteStats paste_check_core(const GameInstance& inst, std::uint64_t seed, int count) {
  std::mt19937_64 rng(detail::mix_seed(seed, 0, 0x9a57e));
  auto pick_int = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto random_policy = [&]() {
    Policy p;
    p.choice.assign(inst.tree.nodes.size(), 0);
    for (const Node& n : inst.tree.nodes)
      if (!inst.tree.is_leaf(n.id))
        p.choice[static_cast<std::size_t>(n.id)] = static_cast<std::int32_t>(
            pick_int(0, static_cast<int>(inst.menu.at(n.id).size()) - 1));
    return p;
  };

  PasteStats stats;
  stats.pastes = count;
  const int n_steps = inst.tree.grid.steps;
  for (int iteration = 0; iteration < count; ++iteration) {
    const int s = pick_int(0, std::max(0, n_steps - 1));
    const auto& depth_nodes = inst.tree.nodes_at_depth(s);
    const int groups = pick_int(1, 3);
    std::vector<int> assignment(depth_nodes.size());
    bool any = false;
    for (auto& a : assignment) {
      a = pick_int(0, groups);
      any = any || a > 0;
    }
    if (!any) assignment[0] = 1;

    const Policy base = random_policy();
    std::vector<PolicyPatch> patches;
    for (int j = 1; j <= groups; ++j) {
      PolicyPatch patch;
      patch.policy = random_policy();
      for (std::size_t i = 0; i < depth_nodes.size(); ++i)
        if (assignment[i] == j) patch.region.push_back(depth_nodes[i]);
      patches.push_back(std::move(patch));
    }

    const Policy pasted = paste_policies(inst.tree, inst.menu, base, patches, s);
    try {
      validate_policy(inst.tree, inst.menu, pasted);
    } catch (const Error&) {
      stats.closure_ok = false;
      continue;
    }

    const TreeMeasure base_measure = measure_of(inst.tree, inst.menu, base);
    const TreeMeasure pasted_measure = measure_of(inst.tree, inst.menu, pasted);

    for (const Node& n : inst.tree.nodes)
      if (n.depth <= s)
        stats.worst_marginal_gap = std::max(
            stats.worst_marginal_gap,
            std::abs(pasted_measure.node_prob[static_cast<std::size_t>(n.id)] -
                     base_measure.node_prob[static_cast<std::size_t>(n.id)]));

    std::vector<int> patch_of(inst.tree.nodes.size(), -1);
    for (std::size_t j = 0; j < patches.size(); ++j)
      for (NodeId a : patches[j].region) patch_of[static_cast<std::size_t>(a)] = static_cast<int>(j);

    for (NodeId leaf : inst.tree.leaves()) {
      const NodeId ancestor = inst.tree.path_nodes(leaf)[static_cast<std::size_t>(s)];
      const int j = patch_of[static_cast<std::size_t>(ancestor)];
      double expected;
      if (j >= 0) {
        const double cond =
            detail::product_below(inst.tree, inst.menu, patches[static_cast<std::size_t>(j)].policy,
                                  ancestor, leaf);
        stats.worst_conditional_gap = std::max(
            stats.worst_conditional_gap,
            std::abs(detail::product_below(inst.tree, inst.menu, pasted, ancestor, leaf) - cond));
        expected = base_measure.node_prob[static_cast<std::size_t>(ancestor)] * cond;
      } else {
        expected = base_measure.node_prob[static_cast<std::size_t>(leaf)];
      }
      stats.worst_formula_gap = std::max(
          stats.worst_formula_gap,
          std::abs(pasted_measure.node_prob[static_cast<std::size_t>(leaf)] - expected));
    }
  }
  return stats;
}

inline Report run_paste_check(const GameInstance& inst, const RunFlags& flags) {
  Report report = detail::make_report("paste-check", inst.digest);
  const Tolerances tol = detail::effective_tolerances(inst.tolerances, flags);
  const PasteStats stats = paste_check_core(inst, flags.seed, flags.count);

  auto& results = report.json["results"];
  results["pastes"] = stats.pastes;
  results["closure_ok"] = stats.closure_ok;
  results["worst_marginal_gap"] = stats.worst_marginal_gap;
  results["worst_conditional_gap"] = stats.worst_conditional_gap;
  results["worst_formula_gap"] = stats.worst_formula_gap;

  detail::add_outcome(report, "paste_closure", stats.closure_ok ? 0.0 : 1.0, 0.0,
                      stats.closure_ok);
  detail::add_outcome(report, "paste_marginal_gap", stats.worst_marginal_gap, tol.region,
                      stats.worst_marginal_gap <= tol.region);
  detail::add_outcome(report, "paste_conditional_gap", stats.worst_conditional_gap, tol.region,
                      stats.worst_conditional_gap <= tol.region);
  detail::add_outcome(report, "paste_formula_gap", stats.worst_formula_gap, tol.region,
                      stats.worst_formula_gap <= tol.region);
  return report;
}

// ---------------------------------------------------------------------------
// sde-check

inline Report run_sde_check(const GameSpec& spec, const RunFlags& flags) {
  Report report = detail::make_report("sde-check", spec.digest);
  if (!spec.sde)
    raise(ErrorCode::ValidationError, "sde-check needs a generator spec");
  const SdeSpec& sde = *spec.sde;
  const auto rows = check_increment_scaling(sde, {2, 4, 8}, 1, spec.caps.max_nodes);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  auto arr = nlohmann::ordered_json::array();
  for (const ScalingRow& row : rows) {
    arr.push_back({{"steps", row.steps},
                   {"delta", row.delta},
                   {"window", row.window},
                   {"expected_sup", row.expected_sup},
                   {"ratio", row.ratio}});
    lo = std::min(lo, row.ratio);
    hi = std::max(hi, row.ratio);
  }
  const double spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  const double probe = lipschitz_probe(sde, flags.seed, 1000);

  auto& results = report.json["results"];
  results["rows"] = std::move(arr);
  results["ratio_spread"] = spread;
  results["lipschitz_ratio"] = probe;
  results["kappa"] = sde.kappa;

  detail::add_outcome(report, "scaling_spread", spread, 4.0, spread <= 4.0);
  detail::add_outcome(report, "lipschitz_ratio", probe, sde.kappa * (1.0 + 1e-9),
                      probe <= sde.kappa * (1.0 + 1e-9));
  return report;
}

// ---------------------------------------------------------------------------
// sweep

/// All per-instance gaps the sweep asserts on.
struct InstanceChecks {
  double v0 = 0.0;
  double coincidence_gap = 0.0;
  double tau_star_gap = 0.0;
  double saddle_dev = 0.0;  // triplet mode only
  double submartingale_worst = 0.0;
  double sandwich_worst = 0.0;
  double terminal_worst = 0.0;
  double bound_slack = -std::numeric_limits<double>::infinity();
  double grid_monotone_violation = 0.0;
  double grid_cap_violation = 0.0;
  double grid_full_gap = 0.0;
  double grid_oracle_gap = 0.0;
  std::uint64_t policies = 0;
  std::uint64_t stopping_times = 0;
  std::int64_t nodes = 0;
};

namespace detail {

inline void accumulate_sandwich(const ScenarioTree& tree, const GameSolution& sol,
                                InstanceChecks& checks) {
  for (const Node& n : tree.nodes) {
    const auto i = static_cast<std::size_t>(n.id);
    const bool eligible = sol.eligible[static_cast<std::size_t>(n.depth)] != 0;
    double viol = std::max(sol.v[i] - sol.u[i], 0.0);
    if (eligible) viol = std::max(viol, sol.l[i] - sol.v[i]);
    checks.sandwich_worst = std::max(checks.sandwich_worst, viol);
    if (tree.is_leaf(n.id))
      checks.terminal_worst = std::max(checks.terminal_worst, std::abs(sol.v[i] - sol.l[i]));
  }
}

}  // namespace detail

inline InstanceChecks run_instance_checks(const GameInstance& inst, const RunFlags& flags,
                                          std::uint64_t seed, std::uint64_t index) {
  const double inf = std::numeric_limits<double>::infinity();
  const OracleCaps caps = inst.caps.oracle();
  InstanceChecks checks;
  checks.nodes = inst.tree.node_count();

  checks.bound_slack = check_payoff_bound(inst.payoff, inst.tree, inf);

  const GameSolution sol =
      backward_induction(inst.tree, inst.payoff, inst.menu, inst.tolerances.region);
  checks.v0 = sol.value_at_root();
  detail::accumulate_sandwich(inst.tree, sol, checks);

  const OracleCounts counts =
      oracle_counts(inst.tree, inst.menu, all_depths_eligible(inst.tree.grid.steps), caps);
  checks.policies = counts.policies;
  checks.stopping_times = counts.stopping_times;

  const double lower = lower_value_bruteforce(inst.tree, inst.payoff, inst.menu, caps);
  const double upper = upper_value_bruteforce(inst.tree, inst.payoff, inst.menu, caps, nullptr,
                                              flags.workers);
  checks.coincidence_gap = std::max(
      {std::abs(lower - upper), std::abs(lower - checks.v0), std::abs(upper - checks.v0)});

  checks.tau_star_gap =
      verify_tau_star(inst.tree, inst.payoff, inst.menu, extract_tau_star(inst.tree, sol), inf);

  if (inst.mode == Mode::triplet)
    checks.saddle_dev =
        verify_saddle(inst.tree, inst.payoff, inst.menu, extract_tau_star(inst.tree, sol),
                      extract_gamma_star(inst.tree, sol), extract_p_star(inst.tree, sol), caps,
                      inf)
            .max_dev;

  // submartingale slack against zeta == horizon and five random regions
  checks.submartingale_worst =
      submartingale_slack(inst.tree, inst.menu, sol, empty_region(inst.tree), true);
  std::mt19937_64 zeta_rng(detail::mix_seed(seed, index, 0x2e7a));
  for (int z = 0; z < 5; ++z) {
    const StoppingRegion zeta = random_region(inst.tree, zeta_rng);
    checks.submartingale_worst =
        std::min(checks.submartingale_worst,
                 submartingale_slack(inst.tree, inst.menu, sol, zeta, true));
  }

  // grid approximations: monotone in n, capped by the unrestricted value,
  // exact once the dyadic grid refines every step
  const int n_full = detail::smallest_full_grid_level(inst.tree.grid.steps);
  double previous = -inf;
  for (int n = 0; n <= n_full; ++n) {
    const GameSolution grid_sol =
        backward_induction_grid(inst.tree, inst.payoff, inst.menu, n, inst.tolerances.region);
    detail::accumulate_sandwich(inst.tree, grid_sol, checks);
    const double vn = grid_sol.value_at_root();
    checks.grid_monotone_violation =
        std::max(checks.grid_monotone_violation, previous - vn);
    checks.grid_cap_violation = std::max(checks.grid_cap_violation, vn - checks.v0);
    if (n == n_full) checks.grid_full_gap = std::abs(vn - checks.v0);
    if (n == 0) {
      const std::vector<char> eligible = eligible_depths(inst.tree.grid.steps, 0);
      const double grid_upper = upper_value_bruteforce(inst.tree, inst.payoff, inst.menu, caps,
                                                       &eligible, flags.workers);
      checks.grid_oracle_gap = std::abs(grid_upper - vn);
    }
    previous = vn;
  }
  return checks;
}

inline Report run_sweep(const std::optional<GameSpec>& spec, const RunFlags& flags) {
  Report report = detail::make_report("sweep", spec ? spec->digest : "builtin-defaults");
  Tolerances tol =
      detail::effective_tolerances(spec ? spec->tolerances : Tolerances{}, flags);
  Mode mode = spec ? spec->mode : Mode::standard;
  if (flags.mode_override) {
    if (*flags.mode_override == "standard") mode = Mode::standard;
    else if (*flags.mode_override == "triplet") mode = Mode::triplet;
    else raise(ErrorCode::ValidationError, "sweep mode must be 'standard' or 'triplet'");
  }

  InstanceChecks worst;
  worst.submartingale_worst = std::numeric_limits<double>::infinity();
  auto rows = nlohmann::ordered_json::array();
  for (int i = 0; i < flags.count; ++i) {
    const GameInstance inst =
        random_instance(flags.seed, static_cast<std::uint64_t>(i), mode);
    const InstanceChecks checks =
        run_instance_checks(inst, flags, flags.seed, static_cast<std::uint64_t>(i));
    rows.push_back({{"index", i},
                    {"nodes", checks.nodes},
                    {"policies", checks.policies},
                    {"stopping_times", checks.stopping_times},
                    {"V0", checks.v0},
                    {"coincidence_gap", checks.coincidence_gap},
                    {"tau_star_gap", checks.tau_star_gap},
                    {"saddle_dev", checks.saddle_dev},
                    {"submartingale_worst", checks.submartingale_worst},
                    {"sandwich_worst", checks.sandwich_worst},
                    {"terminal_worst", checks.terminal_worst},
                    {"grid_monotone_violation", checks.grid_monotone_violation},
                    {"grid_full_gap", checks.grid_full_gap},
                    {"grid_oracle_gap", checks.grid_oracle_gap}});
    worst.coincidence_gap = std::max(worst.coincidence_gap, checks.coincidence_gap);
    worst.tau_star_gap = std::max(worst.tau_star_gap, checks.tau_star_gap);
    worst.saddle_dev = std::max(worst.saddle_dev, checks.saddle_dev);
    worst.submartingale_worst =
        std::min(worst.submartingale_worst, checks.submartingale_worst);
    worst.sandwich_worst = std::max(worst.sandwich_worst, checks.sandwich_worst);
    worst.terminal_worst = std::max(worst.terminal_worst, checks.terminal_worst);
    worst.bound_slack = std::max(worst.bound_slack, checks.bound_slack);
    worst.grid_monotone_violation =
        std::max(worst.grid_monotone_violation, checks.grid_monotone_violation);
    worst.grid_cap_violation = std::max(worst.grid_cap_violation, checks.grid_cap_violation);
    worst.grid_full_gap = std::max(worst.grid_full_gap, checks.grid_full_gap);
    worst.grid_oracle_gap = std::max(worst.grid_oracle_gap, checks.grid_oracle_gap);
  }

  auto& results = report.json["results"];
  results["count"] = flags.count;
  results["seed"] = flags.seed;
  results["mode"] = to_string(mode);
  results["worst"] = {{"coincidence_gap", worst.coincidence_gap},
                      {"tau_star_gap", worst.tau_star_gap},
                      {"saddle_dev", worst.saddle_dev},
                      {"submartingale_worst", worst.submartingale_worst},
                      {"sandwich_worst", worst.sandwich_worst},
                      {"terminal_worst", worst.terminal_worst},
                      {"payoff_bound_slack", worst.bound_slack},
                      {"grid_monotone_violation", worst.grid_monotone_violation},
                      {"grid_cap_violation", worst.grid_cap_violation},
                      {"grid_full_gap", worst.grid_full_gap},
                      {"grid_oracle_gap", worst.grid_oracle_gap}};
  results["instances"] = std::move(rows);

  detail::add_outcome(report, "coincidence_gap", worst.coincidence_gap, tol.oracle,
                      worst.coincidence_gap <= tol.oracle);
  detail::add_outcome(report, "tau_star_gap", worst.tau_star_gap, tol.oracle,
                      worst.tau_star_gap <= tol.oracle);
  if (mode == Mode::triplet)
    detail::add_outcome(report, "saddle_dev", worst.saddle_dev, tol.oracle,
                        worst.saddle_dev <= tol.oracle);
  detail::add_outcome(report, "submartingale_worst", worst.submartingale_worst,
                      tol.submartingale, worst.submartingale_worst >= -tol.submartingale);
  detail::add_outcome(report, "sandwich_worst", worst.sandwich_worst, tol.region,
                      worst.sandwich_worst <= tol.region);
  detail::add_outcome(report, "terminal_worst", worst.terminal_worst, tol.region,
                      worst.terminal_worst <= tol.region);
  detail::add_outcome(report, "payoff_bound_slack", worst.bound_slack, tol.payoff_bound,
                      worst.bound_slack <= tol.payoff_bound);
  detail::add_outcome(report, "grid_monotone_violation", worst.grid_monotone_violation,
                      tol.oracle, worst.grid_monotone_violation <= tol.oracle);
  detail::add_outcome(report, "grid_cap_violation", worst.grid_cap_violation, tol.oracle,
                      worst.grid_cap_violation <= tol.oracle);
  detail::add_outcome(report, "grid_full_gap", worst.grid_full_gap, tol.region,
                      worst.grid_full_gap <= tol.region);
  detail::add_outcome(report, "grid_oracle_gap", worst.grid_oracle_gap, tol.oracle,
                      worst.grid_oracle_gap <= tol.oracle);
  return report;
}

// ---------------------------------------------------------------------------
// dispatcher

inline Report run(const std::string& command, const std::optional<GameSpec>& spec_in,
                  const RunFlags& flags) {
  const auto started = std::chrono::steady_clock::now();
  std::optional<GameSpec> spec = spec_in;
  if (spec && flags.max_nodes_override) spec->caps.max_nodes = *flags.max_nodes_override;

  Report report;
  if (command == "sweep") {
    report = run_sweep(spec, flags);
  } else if (command == "sde-check") {
    if (!spec) raise(ErrorCode::ValidationError, "sde-check needs a spec file");
    report = run_sde_check(*spec, flags);
  } else {
    if (!spec) raise(ErrorCode::ValidationError, command + " needs a spec file");
    const GameInstance inst = realize(*spec);
    if (command == "solve") report = run_solve(inst, flags);
    else if (command == "oracle") report = run_oracle(inst, flags);
    else if (command == "converge") report = run_converge(inst, flags);
    else if (command == "paste-check") report = run_paste_check(inst, flags);
    else raise(ErrorCode::ValidationError, "unknown command '" + command + "'");
  }
  const auto elapsed = std::chrono::steady_clock::now() - started;
  report.json["wall_time_ms"] =
      std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed).count();
  return report;
}

}  // namespace rdg
