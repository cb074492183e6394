#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rdg/ambiguity.hpp"
#include "rdg/errors.hpp"
#include "rdg/payoff.hpp"
#include "rdg/scenario_tree.hpp"
#include "rdg/solver.hpp"
#include "rdg/stopping.hpp"

namespace rdg {

namespace defaults {
inline constexpr double triple_cap = 1e10;
inline constexpr double oracle_tol = 1e-9;
}  // namespace defaults

struct OracleCaps {
  std::uint64_t policy_cap = defaults::policy_cap;
  std::uint64_t rule_cap = defaults::rule_cap;
  double triple_cap = defaults::triple_cap;
};

struct OracleCounts {
  std::uint64_t stopping_times = 0;  // Player 1 rules under the given eligibility
  std::uint64_t gamma_times = 0;     // Player 2 rules (always unrestricted)
  std::uint64_t policies = 0;
};

namespace detail {

/// Payoff snapshots the inner scans run on.
struct GameArrays {
  std::vector<double> l, u, g;
  double dt = 0.0;
};

inline GameArrays make_arrays(const ScenarioTree& tree, const PayoffSpec& payoff) {
  GameArrays a;
  const std::size_t count = tree.nodes.size();
  a.l.resize(count);
  a.u.resize(count);
  a.g.resize(count);
  a.dt = tree.grid.dt();
  for (const Node& n : tree.nodes) {
    const auto i = static_cast<std::size_t>(n.id);
    a.l[i] = eval_L(payoff, tree, n.id);
    a.u[i] = eval_U(payoff, tree, n.id);
    a.g[i] = eval_g(payoff, tree, n.id);
  }
  return a;
}

/// Value of the game when Player 1 commits to `tau` and one adversary picks
/// both gamma and the kernels. One-agent sweep, exact for finite trees.
inline double dp_inf_gamma_policy(const ScenarioTree& tree, const GameArrays& a,
                                  const KernelMenu& menu, const std::vector<char>& tau_flags,
                                  std::vector<double>& value) {
  value.resize(tree.nodes.size());
  for (auto it = tree.nodes.rbegin(); it != tree.nodes.rend(); ++it) {
    const Node& n = *it;
    const auto i = static_cast<std::size_t>(n.id);
    if (tau_flags[i] || tree.is_leaf(n.id)) {
      value[i] = a.l[i];
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const Kernel& k : menu.at(n.id)) {
      double s = 0.0;
      for (std::size_t c = 0; c < n.children.size(); ++c)
        s += k.weights[c] * value[static_cast<std::size_t>(n.children[c])];
      best = std::min(best, s);
    }
    value[i] = std::min(a.u[i], best + a.g[i] * a.dt);
  }
  return value[0];
}

/// Player 1's best response against a fixed policy and gamma, stopping only at
/// eligible depths.
inline double dp_sup_tau(const ScenarioTree& tree, const GameArrays& a, const KernelMenu& menu,
                         const Policy& policy, const std::vector<char>& gamma_flags,
                         const std::vector<char>& eligible, std::vector<double>& value) {
  value.resize(tree.nodes.size());
  for (auto it = tree.nodes.rbegin(); it != tree.nodes.rend(); ++it) {
    const Node& n = *it;
    const auto i = static_cast<std::size_t>(n.id);
    if (tree.is_leaf(n.id)) {
      value[i] = a.l[i];  // both players are forced out; the tie pays L
      continue;
    }
    if (gamma_flags[i]) {
      value[i] = a.u[i];  // waiting past gamma beats tying since L <= U
      continue;
    }
    const Kernel& k = menu.at(n.id)[static_cast<std::size_t>(
        policy.choice[static_cast<std::size_t>(n.id)])];
    double s = 0.0;
    for (std::size_t c = 0; c < n.children.size(); ++c)
      s += k.weights[c] * value[static_cast<std::size_t>(n.children[c])];
    const double cont = s + a.g[i] * a.dt;
    value[i] = eligible[static_cast<std::size_t>(n.depth)] ? std::max(a.l[i], cont) : cont;
  }
  return value[0];
}

/// Nature's best reply to a fixed pair of stopping rules.
inline double dp_inf_policy(const ScenarioTree& tree, const GameArrays& a,
                            const KernelMenu& menu, const std::vector<char>& tau_flags,
                            const std::vector<char>& gamma_flags, std::vector<double>& value) {
  value.resize(tree.nodes.size());
  for (auto it = tree.nodes.rbegin(); it != tree.nodes.rend(); ++it) {
    const Node& n = *it;
    const auto i = static_cast<std::size_t>(n.id);
    if (tau_flags[i] || tree.is_leaf(n.id)) {
      value[i] = a.l[i];
      continue;
    }
    if (gamma_flags[i]) {
      value[i] = a.u[i];
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const Kernel& k : menu.at(n.id)) {
      double s = 0.0;
      for (std::size_t c = 0; c < n.children.size(); ++c)
        s += k.weights[c] * value[static_cast<std::size_t>(n.children[c])];
      best = std::min(best, s);
    }
    value[i] = best + a.g[i] * a.dt;
  }
  return value[0];
}

/// Player 2's best reply to a fixed policy and tau.
inline double dp_inf_gamma(const ScenarioTree& tree, const GameArrays& a, const KernelMenu& menu,
                           const Policy& policy, const std::vector<char>& tau_flags,
                           std::vector<double>& value) {
  value.resize(tree.nodes.size());
  for (auto it = tree.nodes.rbegin(); it != tree.nodes.rend(); ++it) {
    const Node& n = *it;
    const auto i = static_cast<std::size_t>(n.id);
    if (tau_flags[i] || tree.is_leaf(n.id)) {
      value[i] = a.l[i];
      continue;
    }
    const Kernel& k = menu.at(n.id)[static_cast<std::size_t>(
        policy.choice[static_cast<std::size_t>(n.id)])];
    double s = 0.0;
    for (std::size_t c = 0; c < n.children.size(); ++c)
      s += k.weights[c] * value[static_cast<std::size_t>(n.children[c])];
    value[i] = std::min(a.u[i], s + a.g[i] * a.dt);
  }
  return value[0];
}

inline void check_triple_cap(std::uint64_t taus, std::uint64_t gammas, std::uint64_t policies,
                             double cap) {
  const double total =
      static_cast<double>(taus) * static_cast<double>(gammas) * static_cast<double>(policies);
  if (total > cap)
    raise(ErrorCode::EnumerationTooLarge,
          "triple enumeration of " + std::to_string(total) + " evaluations exceeds the cap");
}

}  // namespace detail

inline OracleCounts oracle_counts(const ScenarioTree& tree, const KernelMenu& menu,
                                  const std::vector<char>& eligible_tau,
                                  const OracleCaps& caps = {}) {
  OracleCounts counts;
  counts.stopping_times = count_stopping_rules(tree, eligible_tau, caps.rule_cap);
  counts.gamma_times =
      count_stopping_rules(tree, all_depths_eligible(tree.grid.steps), caps.rule_cap);
  counts.policies = policy_count(tree, menu, caps.policy_cap);
  detail::check_triple_cap(counts.stopping_times, counts.gamma_times, counts.policies,
                           caps.triple_cap);
  return counts;
}

/// E_P[R(tau, gamma)] by its definition: a probability-weighted sum of the
/// realized payoff over the leaves.
inline double expected_payoff(const ScenarioTree& tree, const PayoffSpec& payoff,
                              const KernelMenu& menu, const StoppingRule& tau,
                              const StoppingRule& gamma, const Policy& policy) {
  const TreeMeasure m = measure_of(tree, menu, policy);
  std::vector<char> tau_flags(tree.nodes.size(), 0), gamma_flags(tree.nodes.size(), 0);
  mark_rule(tau, tau_flags, 1);
  mark_rule(gamma, gamma_flags, 1);
  double out = 0.0;
  for (NodeId leaf : tree.leaves()) {
    const auto path = tree.path_nodes(leaf);
    StopPair pair{tree.grid.steps, tree.grid.steps};
    for (std::size_t k = 0; k < path.size(); ++k) {
      if (tau_flags[static_cast<std::size_t>(path[k])]) {
        pair.tau_depth = static_cast<int>(k);
        break;
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      if (gamma_flags[static_cast<std::size_t>(path[k])]) {
        pair.gamma_depth = static_cast<int>(k);
        break;
      }
    }
    out += m.node_prob[static_cast<std::size_t>(leaf)] * eval_R(payoff, tree, leaf, pair);
  }
  return out;
}

/// sup over tau of inf over (gamma, policy): Player 1 moves first and both
/// adversaries reply. Scans every adapted tau within the caps.
inline double lower_value_bruteforce(const ScenarioTree& tree, const PayoffSpec& payoff,
                                     const KernelMenu& menu, const OracleCaps& caps = {},
                                     const std::vector<char>* eligible_tau = nullptr) {
  const std::vector<char> eligible =
      eligible_tau ? *eligible_tau : all_depths_eligible(tree.grid.steps);
  oracle_counts(tree, menu, eligible, caps);
  const auto rules = enumerate_stopping_rules(tree, eligible, caps.rule_cap);
  const detail::GameArrays arrays = detail::make_arrays(tree, payoff);
  std::vector<char> flags(tree.nodes.size(), 0);
  std::vector<double> scratch;
  double best = -std::numeric_limits<double>::infinity();
  for (const StoppingRule& tau : rules) {
    mark_rule(tau, flags, 1);
    best = std::max(best, detail::dp_inf_gamma_policy(tree, arrays, menu, flags, scratch));
    mark_rule(tau, flags, 0);
  }
  return best;
}

/// inf over policies and gamma of sup over tau: Nature and Player 2 commit,
/// Player 1 best-responds. Policies are scanned in index blocks so the scan
/// parallelizes with a deterministic reduction.
inline double upper_value_bruteforce(const ScenarioTree& tree, const PayoffSpec& payoff,
                                     const KernelMenu& menu, const OracleCaps& caps = {},
                                     const std::vector<char>* eligible_tau = nullptr,
                                     int workers = 1) {
  const std::vector<char> eligible =
      eligible_tau ? *eligible_tau : all_depths_eligible(tree.grid.steps);
  const OracleCounts counts = oracle_counts(tree, menu, eligible, caps);
  const auto gamma_rules =
      enumerate_stopping_rules(tree, all_depths_eligible(tree.grid.steps), caps.rule_cap);
  const detail::GameArrays arrays = detail::make_arrays(tree, payoff);
  const std::uint64_t policies = counts.policies;
  const int blocks = std::max(1, workers);
  const std::uint64_t chunk = (policies + blocks - 1) / static_cast<std::uint64_t>(blocks);
  auto scan_block = [&](std::uint64_t first, std::uint64_t last) {
    std::vector<char> flags(tree.nodes.size(), 0);
    std::vector<double> scratch;
    double block_min = std::numeric_limits<double>::infinity();
    for_each_policy_range(tree, menu, first, last,
                          [&](std::uint64_t, const Policy& policy) {
                            for (const StoppingRule& gamma : gamma_rules) {
                              mark_rule(gamma, flags, 1);
                              block_min = std::min(
                                  block_min, detail::dp_sup_tau(tree, arrays, menu, policy,
                                                                flags, eligible, scratch));
                              mark_rule(gamma, flags, 0);
                            }
                          });
    return block_min;
  };
  if (blocks == 1) return scan_block(0, policies);
  std::vector<std::future<double>> futures;
  for (int b = 0; b < blocks; ++b) {
    const std::uint64_t first = std::min(policies, static_cast<std::uint64_t>(b) * chunk);
    const std::uint64_t last = std::min(policies, first + chunk);
    futures.push_back(std::async(std::launch::async, scan_block, first, last));
  }
  double out = std::numeric_limits<double>::infinity();
  for (auto& f : futures) out = std::min(out, f.get());
  return out;
}

/// Gap between the solver's root value and the worst case over (gamma, policy)
/// when Player 1 plays the hitting time of the given region.
inline double verify_tau_star(const ScenarioTree& tree, const PayoffSpec& payoff,
                              const KernelMenu& menu, const StoppingRegion& tau_star,
                              double tol = defaults::oracle_tol) {
  const detail::GameArrays arrays = detail::make_arrays(tree, payoff);
  const StoppingRule rule = rule_from_region(tree, tau_star);
  std::vector<char> flags(tree.nodes.size(), 0);
  mark_rule(rule, flags, 1);
  std::vector<double> scratch;
  const double worst_case = detail::dp_inf_gamma_policy(tree, arrays, menu, flags, scratch);
  const double v0 = backward_induction(tree, payoff, menu).value_at_root();
  const double gap = std::abs(worst_case - v0);
  if (gap > tol)
    raise(ErrorCode::OptimalityViolated,
          "tau* attains " + std::to_string(worst_case) + " against the solver value " +
              std::to_string(v0));
  return gap;
}

struct SaddleReport {
  double value = 0.0;        // E_{P*}[R(tau*, gamma*)]
  double dev_value = 0.0;    // |value - V0|
  double dev_tau = 0.0;      // positive part of Player 1's best deviation gain
  double dev_gamma = 0.0;    // positive part of the (gamma, policy) deviation gain
  double max_dev = 0.0;
};

/// Checks that (tau*, gamma*, P*) is a saddle: the triple attains the solver
/// value, Player 1 cannot gain against (gamma*, worst policy), and the
/// adversaries cannot push Player 1 below the value against tau*.
inline SaddleReport verify_saddle(const ScenarioTree& tree, const PayoffSpec& payoff,
                                  const KernelMenu& menu, const StoppingRegion& tau_star,
                                  const StoppingRegion& gamma_star, const Policy& p_star,
                                  const OracleCaps& caps = {},
                                  double tol = defaults::oracle_tol) {
  const std::vector<char> all_eligible = all_depths_eligible(tree.grid.steps);
  oracle_counts(tree, menu, all_eligible, caps);
  const StoppingRule tau_rule = rule_from_region(tree, tau_star);
  const StoppingRule gamma_rule = rule_from_region(tree, gamma_star);
  const detail::GameArrays arrays = detail::make_arrays(tree, payoff);

  SaddleReport report;
  report.value = expected_payoff(tree, payoff, menu, tau_rule, gamma_rule, p_star);
  const double v0 = backward_induction(tree, payoff, menu).value_at_root();
  report.dev_value = std::abs(report.value - v0);

  std::vector<char> tau_flags(tree.nodes.size(), 0), gamma_flags(tree.nodes.size(), 0);
  mark_rule(gamma_rule, gamma_flags, 1);
  std::vector<double> scratch;
  double best_deviation = -std::numeric_limits<double>::infinity();
  const auto tau_rules = enumerate_stopping_rules(tree, all_eligible, caps.rule_cap);
  for (const StoppingRule& tau : tau_rules) {
    mark_rule(tau, tau_flags, 1);
    best_deviation =
        std::max(best_deviation,
                 detail::dp_inf_policy(tree, arrays, menu, tau_flags, gamma_flags, scratch));
    mark_rule(tau, tau_flags, 0);
  }
  report.dev_tau = std::max(0.0, best_deviation - report.value);

  mark_rule(tau_rule, tau_flags, 1);
  const double adversary_best =
      detail::dp_inf_gamma_policy(tree, arrays, menu, tau_flags, scratch);
  report.dev_gamma = std::max(0.0, report.value - adversary_best);

  report.max_dev = std::max({report.dev_value, report.dev_tau, report.dev_gamma});
  if (report.max_dev > tol)
    raise(ErrorCode::SaddleViolated,
          "saddle deviation " + std::to_string(report.max_dev) + " (value " +
              std::to_string(report.value) + ", solver " + std::to_string(v0) + ")");
  return report;
}

/// Root values for the five distinct orderings of sup_tau, inf_gamma and
/// inf_policy. Only the outermost-sup and innermost-sup orderings are asserted
/// elsewhere; the mixed ones are reported as-is.
inline std::vector<std::pair<std::string, double>> ordering_values(
    const ScenarioTree& tree, const PayoffSpec& payoff, const KernelMenu& menu,
    const OracleCaps& caps = {}, int workers = 1) {
  const std::vector<char> all_eligible = all_depths_eligible(tree.grid.steps);
  const OracleCounts counts = oracle_counts(tree, menu, all_eligible, caps);
  const detail::GameArrays arrays = detail::make_arrays(tree, payoff);
  const auto rules = enumerate_stopping_rules(tree, all_eligible, caps.rule_cap);
  std::vector<std::pair<std::string, double>> out;

  out.emplace_back("sup_tau.inf_gamma.inf_policy",
                   lower_value_bruteforce(tree, payoff, menu, caps));

  {  // gamma commits, Player 1 replies, Nature replies last
    std::vector<char> tau_flags(tree.nodes.size(), 0), gamma_flags(tree.nodes.size(), 0);
    std::vector<double> scratch;
    double outer = std::numeric_limits<double>::infinity();
    for (const StoppingRule& gamma : rules) {
      mark_rule(gamma, gamma_flags, 1);
      double inner = -std::numeric_limits<double>::infinity();
      for (const StoppingRule& tau : rules) {
        mark_rule(tau, tau_flags, 1);
        inner = std::max(inner, detail::dp_inf_policy(tree, arrays, menu, tau_flags,
                                                      gamma_flags, scratch));
        mark_rule(tau, tau_flags, 0);
      }
      outer = std::min(outer, inner);
      mark_rule(gamma, gamma_flags, 0);
    }
    out.emplace_back("inf_gamma.sup_tau.inf_policy", outer);
  }

  {  // Nature commits, Player 1 replies, gamma replies last
    std::vector<char> tau_flags(tree.nodes.size(), 0);
    std::vector<double> scratch;
    double outer = std::numeric_limits<double>::infinity();
    for_each_policy(
        tree, menu,
        [&](std::uint64_t, const Policy& policy) {
          double inner = -std::numeric_limits<double>::infinity();
          for (const StoppingRule& tau : rules) {
            mark_rule(tau, tau_flags, 1);
            inner = std::max(inner,
                             detail::dp_inf_gamma(tree, arrays, menu, policy, tau_flags, scratch));
            mark_rule(tau, tau_flags, 0);
          }
          outer = std::min(outer, inner);
        },
        caps.policy_cap);
    out.emplace_back("inf_policy.sup_tau.inf_gamma", outer);
  }

  {  // gamma outermost, then Nature, Player 1 last
    std::vector<char> gamma_flags(tree.nodes.size(), 0);
    std::vector<double> scratch;
    double outer = std::numeric_limits<double>::infinity();
    for (const StoppingRule& gamma : rules) {
      mark_rule(gamma, gamma_flags, 1);
      double inner = std::numeric_limits<double>::infinity();
      for_each_policy(
          tree, menu,
          [&](std::uint64_t, const Policy& policy) {
            inner = std::min(inner, detail::dp_sup_tau(tree, arrays, menu, policy, gamma_flags,
                                                       all_eligible, scratch));
          },
          caps.policy_cap);
      outer = std::min(outer, inner);
      mark_rule(gamma, gamma_flags, 0);
    }
    out.emplace_back("inf_gamma.inf_policy.sup_tau", outer);
  }

  out.emplace_back("inf_policy.inf_gamma.sup_tau",
                   upper_value_bruteforce(tree, payoff, menu, caps, nullptr, workers));
  (void)counts;
  return out;
}

}  // namespace rdg
