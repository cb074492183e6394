#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rdg/ambiguity.hpp"
#include "rdg/errors.hpp"
#include "rdg/payoff.hpp"
#include "rdg/scenario_tree.hpp"
#include "rdg/stopping.hpp"

namespace rdg {

namespace defaults {
inline constexpr double region_tol = 1e-12;
inline constexpr double submartingale_tol = 1e-9;
}  // namespace defaults

/// Output of one backward sweep. `grid_level` empty means Player 1 could stop
/// at every depth; a number n restricts her to the level-n eligible depths.
struct GameSolution {
  std::optional<int> grid_level;
  std::vector<char> eligible;       // by depth, 0..N
  std::vector<double> v;            // game value per node
  std::vector<double> cont;         // continuation value, NaN at leaves
  std::vector<int> argmin_kernel;   // -1 at leaves
  std::vector<char> p1_stop;        // value meets L
  std::vector<char> p2_stop;        // value meets U strictly above L; leaves in
  std::vector<double> l, u, g;      // payoff snapshots per node

  double value_at_root() const { return v[0]; }
};

/// Backward sweep of the doubly reflected recursion. Leaves take L. At an
/// eligible interior node v = min(U, max(L, c)); where Player 1 may not stop,
/// v = min(U, c). The continuation c is the menu-infimum of the children's
/// values plus the running reward for the step.
inline GameSolution backward_induction_grid(const ScenarioTree& tree, const PayoffSpec& payoff,
                                            const KernelMenu& menu, std::optional<int> level,
                                            double region_tol = defaults::region_tol) {
  if (level && *level < 0)
    raise(ErrorCode::ValidationError, "grid level must be >= 0");
  const std::size_t count = tree.nodes.size();
  GameSolution sol;
  sol.grid_level = level;
  sol.eligible = level ? eligible_depths(tree.grid.steps, *level)
                       : all_depths_eligible(tree.grid.steps);
  sol.v.assign(count, 0.0);
  sol.cont.assign(count, std::numeric_limits<double>::quiet_NaN());
  sol.argmin_kernel.assign(count, -1);
  sol.p1_stop.assign(count, 0);
  sol.p2_stop.assign(count, 0);
  sol.l.resize(count);
  sol.u.resize(count);
  sol.g.resize(count);
  for (const Node& n : tree.nodes) {
    const auto i = static_cast<std::size_t>(n.id);
    sol.l[i] = eval_L(payoff, tree, n.id);
    sol.u[i] = eval_U(payoff, tree, n.id);
    sol.g[i] = eval_g(payoff, tree, n.id);
  }
  const double dt = tree.grid.dt();
  std::vector<double> child_values;
  for (auto it = tree.nodes.rbegin(); it != tree.nodes.rend(); ++it) {
    const Node& n = *it;
    const auto i = static_cast<std::size_t>(n.id);
    if (tree.is_leaf(n.id)) {
      sol.v[i] = sol.l[i];
      sol.p1_stop[i] = 1;
      sol.p2_stop[i] = 1;
      continue;
    }
    child_values.clear();
    for (NodeId c : n.children) child_values.push_back(sol.v[static_cast<std::size_t>(c)]);
    const InfResult inf = one_step_inf_expectation(menu.at(n.id), child_values);
    const double c = inf.value + sol.g[i] * dt;
    sol.cont[i] = c;
    sol.argmin_kernel[i] = inf.kernel;
    const bool can_stop = sol.eligible[static_cast<std::size_t>(n.depth)] != 0;
    sol.v[i] = can_stop ? std::min(sol.u[i], std::max(sol.l[i], c)) : std::min(sol.u[i], c);
    sol.p1_stop[i] = std::abs(sol.v[i] - sol.l[i]) <= region_tol ? 1 : 0;
    sol.p2_stop[i] =
        (std::abs(sol.v[i] - sol.u[i]) <= region_tol && sol.v[i] > sol.l[i] + region_tol) ? 1
                                                                                          : 0;
  }
  return sol;
}

inline GameSolution backward_induction(const ScenarioTree& tree, const PayoffSpec& payoff,
                                       const KernelMenu& menu,
                                       double region_tol = defaults::region_tol) {
  return backward_induction_grid(tree, payoff, menu, std::nullopt, region_tol);
}

/// Hitting region of {v = L}: Player 1's optimal stopping time.
inline StoppingRegion extract_tau_star(const ScenarioTree& tree, const GameSolution& sol) {
  StoppingRegion region = empty_region(tree);
  for (const Node& n : tree.nodes)
    region.member[static_cast<std::size_t>(n.id)] = sol.p1_stop[static_cast<std::size_t>(n.id)];
  return region;
}

/// Hitting region of {v = U, v > L}, plus all leaves: Player 2's stopping time.
inline StoppingRegion extract_gamma_star(const ScenarioTree& tree, const GameSolution& sol) {
  StoppingRegion region = empty_region(tree);
  for (const Node& n : tree.nodes)
    region.member[static_cast<std::size_t>(n.id)] =
        tree.is_leaf(n.id) ? 1 : sol.p2_stop[static_cast<std::size_t>(n.id)];
  return region;
}

/// The policy picking the minimizing kernel at every decision node.
inline Policy extract_p_star(const ScenarioTree& tree, const GameSolution& sol) {
  Policy p;
  p.choice.assign(tree.nodes.size(), 0);
  for (const Node& n : tree.nodes)
    if (!tree.is_leaf(n.id))
      p.choice[static_cast<std::size_t>(n.id)] =
          sol.argmin_kernel[static_cast<std::size_t>(n.id)];
  return p;
}

/// Upsilon = v plus the accumulated running reward of the strict ancestors.
inline std::vector<double> upsilon(const ScenarioTree& tree, const GameSolution& sol) {
  std::vector<double> acc(tree.nodes.size(), 0.0);
  const double dt = tree.grid.dt();
  for (const Node& n : tree.nodes)
    for (NodeId c : n.children)
      acc[static_cast<std::size_t>(c)] =
          acc[static_cast<std::size_t>(n.id)] + sol.g[static_cast<std::size_t>(n.id)] * dt;
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += sol.v[i];
  return acc;
}

/// Worst slack of the submartingale property of Upsilon stopped at the first
/// entry of {v = L} or `zeta`: at every node not yet absorbed, the backward
/// inf-expectation of the stopped values must dominate Upsilon there. With
/// `stop_at_value_floor` off, the {v = L} region is ignored and the slack
/// describes the unstopped process, which may legitimately go negative.
inline double submartingale_slack(const ScenarioTree& tree, const KernelMenu& menu,
                                  const GameSolution& sol, const StoppingRegion& zeta,
                                  bool stop_at_value_floor = true,
                                  NodeId* witness = nullptr) {
  if (sol.grid_level)
    raise(ErrorCode::ValidationError, "submartingale check needs the unrestricted solution");
  const std::vector<double> ups = upsilon(tree, sol);
  const std::size_t count = tree.nodes.size();
  std::vector<char> stopped(count, 0);
  for (std::size_t i = 0; i < count; ++i)
    stopped[i] = ((stop_at_value_floor && sol.p1_stop[i] != 0) || zeta.member[i] != 0 ||
                  tree.is_leaf(static_cast<NodeId>(i)))
                     ? 1
                     : 0;
  // backward values of the stopped process, frozen on the stop set
  std::vector<double> stopped_value(count, 0.0);
  std::vector<double> child_values;
  for (auto it = tree.nodes.rbegin(); it != tree.nodes.rend(); ++it) {
    const Node& n = *it;
    const auto i = static_cast<std::size_t>(n.id);
    if (stopped[i]) {
      stopped_value[i] = ups[i];
      continue;
    }
    child_values.clear();
    for (NodeId c : n.children)
      child_values.push_back(stopped_value[static_cast<std::size_t>(c)]);
    stopped_value[i] = one_step_inf_expectation(menu.at(n.id), child_values).value;
  }
  // absorbed below a stopped strict ancestor: the comparison is vacuous there
  std::vector<char> absorbed(count, 0);
  double worst = 0.0;
  NodeId worst_node = -1;
  for (const Node& n : tree.nodes) {
    const auto i = static_cast<std::size_t>(n.id);
    for (NodeId c : n.children)
      absorbed[static_cast<std::size_t>(c)] = absorbed[i] || stopped[i];
    if (absorbed[i]) continue;
    const double slack = stopped_value[i] - ups[i];
    if (slack < worst) {
      worst = slack;
      worst_node = n.id;
    }
  }
  if (witness) *witness = worst_node;
  return worst;
}

inline double verify_submartingale(const ScenarioTree& tree, const KernelMenu& menu,
                                   const GameSolution& sol, const StoppingRegion& zeta,
                                   double tol = defaults::submartingale_tol) {
  NodeId worst_node = -1;
  const double worst = submartingale_slack(tree, menu, sol, zeta, true, &worst_node);
  if (worst < -tol)
    raise(ErrorCode::SubmartingaleViolated,
          "slack " + std::to_string(worst) + " at node " + std::to_string(worst_node));
  return worst;
}

struct ConvergenceRow {
  int level = 0;
  double v0 = 0.0;
  double gap = 0.0;  // unrestricted root value minus the level value
};

/// Root values of the grid-restricted sweeps for n = 0..n_max, with the gaps
/// to the unrestricted value. Gaps shrink to zero once 2^n >= N.
inline std::vector<ConvergenceRow> convergence_report(const ScenarioTree& tree,
                                                      const PayoffSpec& payoff,
                                                      const KernelMenu& menu, int n_max) {
  if (n_max < 0) raise(ErrorCode::ValidationError, "n_max must be >= 0");
  const double full = backward_induction(tree, payoff, menu).value_at_root();
  std::vector<ConvergenceRow> rows;
  for (int n = 0; n <= n_max; ++n) {
    const double vn = backward_induction_grid(tree, payoff, menu, n).value_at_root();
    rows.push_back(ConvergenceRow{n, vn, full - vn});
  }
  return rows;
}

}  // namespace rdg
