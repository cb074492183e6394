#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdg/errors.hpp"
#include "rdg/scenario_tree.hpp"

namespace rdg {

namespace defaults {
inline constexpr std::uint64_t rule_cap = 100'000;
}  // namespace defaults

/// A set of nodes read as a stopping time: stop at the first node of the set
/// along each path, and at the leaf if the path never meets the set.
struct StoppingRegion {
  std::vector<char> member;  // by node id

  bool contains(NodeId id) const { return member[static_cast<std::size_t>(id)] != 0; }
};

inline StoppingRegion empty_region(const ScenarioTree& tree) {
  return StoppingRegion{std::vector<char>(tree.nodes.size(), 0)};
}

/// Realized stop depth along the path to `leaf` (first entry, leaves forced).
inline int stop_depth_along(const ScenarioTree& tree, const StoppingRegion& region,
                            NodeId leaf) {
  const auto path = tree.path_nodes(leaf);
  for (std::size_t k = 0; k < path.size(); ++k)
    if (region.contains(path[k])) return static_cast<int>(k);
  return tree.grid.steps;
}

/// Depths where Player 1 may stop at refinement level n: depth 0 and N always,
/// and every depth whose time slot (t_{k-1}, t_k] contains a dyadic point
/// i * 2^-n * T. Exact integer arithmetic; the sets are nested in n and cover
/// all depths once 2^n >= N.
inline std::vector<char> eligible_depths(int n_steps, int level) {
  std::vector<char> out(static_cast<std::size_t>(n_steps) + 1, 0);
  out[0] = 1;
  out[static_cast<std::size_t>(n_steps)] = 1;
  if (level >= 40 || (std::uint64_t{1} << level) >= static_cast<std::uint64_t>(n_steps)) {
    std::fill(out.begin(), out.end(), 1);
    return out;
  }
  const std::uint64_t pow2 = std::uint64_t{1} << level;
  const auto n = static_cast<std::uint64_t>(n_steps);
  for (std::uint64_t k = 1; k + 1 <= n; ++k) {
    // a dyadic point in ((k-1)/N, k/N] exists iff floor(k*2^l/N) > floor((k-1)*2^l/N)
    if ((k * pow2) / n > ((k - 1) * pow2) / n) out[static_cast<std::size_t>(k)] = 1;
  }
  return out;
}

inline std::vector<char> all_depths_eligible(int n_steps) {
  return std::vector<char>(static_cast<std::size_t>(n_steps) + 1, 1);
}

/// An adapted stopping rule in minimal form: the antichain of first-stop
/// nodes. Every root-to-leaf path meets exactly one element.
using StoppingRule = std::vector<NodeId>;

namespace detail {

inline std::uint64_t count_rules_below(const ScenarioTree& tree, const std::vector<char>& eligible,
                                       NodeId id, std::uint64_t cap) {
  const Node& n = tree.node(id);
  if (tree.is_leaf(id)) return 1;
  std::uint64_t combos = 1;
  for (NodeId c : n.children) {
    const std::uint64_t below = count_rules_below(tree, eligible, c, cap);
    if (combos > cap / below)
      raise(ErrorCode::EnumerationTooLarge,
            "stopping-rule family exceeds the cap of " + std::to_string(cap));
    combos *= below;
  }
  const std::uint64_t stop_here = eligible[static_cast<std::size_t>(n.depth)] ? 1 : 0;
  if (combos > cap - stop_here)
    raise(ErrorCode::EnumerationTooLarge,
          "stopping-rule family exceeds the cap of " + std::to_string(cap));
  return stop_here + combos;
}

}  // namespace detail

inline std::uint64_t count_stopping_rules(const ScenarioTree& tree,
                                          const std::vector<char>& eligible,
                                          std::uint64_t cap = defaults::rule_cap) {
  if (!eligible[static_cast<std::size_t>(tree.grid.steps)])
    raise(ErrorCode::ValidationError, "depth N must always be eligible");
  return detail::count_rules_below(tree, eligible, tree.root(), cap);
}

/// All adapted rules with stop depths in the eligible set, in a fixed order:
/// at each node "stop here" precedes the child combinations, which cycle with
/// the last child fastest.
inline std::vector<StoppingRule> enumerate_stopping_rules(
    const ScenarioTree& tree, const std::vector<char>& eligible,
    std::uint64_t cap = defaults::rule_cap) {
  count_stopping_rules(tree, eligible, cap);  // cap check up front
  std::vector<std::vector<StoppingRule>> per_node(tree.nodes.size());
  for (auto it = tree.nodes.rbegin(); it != tree.nodes.rend(); ++it) {
    const Node& n = *it;
    auto& list = per_node[static_cast<std::size_t>(n.id)];
    if (tree.is_leaf(n.id)) {
      list.push_back({n.id});
      continue;
    }
    if (eligible[static_cast<std::size_t>(n.depth)]) list.push_back({n.id});
    std::vector<std::size_t> idx(n.children.size(), 0);
    while (true) {
      StoppingRule combo;
      for (std::size_t c = 0; c < n.children.size(); ++c) {
        const auto& sub = per_node[static_cast<std::size_t>(n.children[c])][idx[c]];
        combo.insert(combo.end(), sub.begin(), sub.end());
      }
      list.push_back(std::move(combo));
      std::size_t c = n.children.size();
      while (c > 0) {
        --c;
        if (++idx[c] < per_node[static_cast<std::size_t>(n.children[c])].size()) break;
        idx[c] = 0;
        if (c == 0) goto done;
      }
      if (n.children.empty()) break;
    }
  done:;
  }
  return std::move(per_node[0]);
}

inline StoppingRegion region_from_rule(const ScenarioTree& tree, const StoppingRule& rule) {
  StoppingRegion region = empty_region(tree);
  for (NodeId id : rule) region.member[static_cast<std::size_t>(id)] = 1;
  return region;
}

/// Minimal antichain realizing a region's first-entry stopping time. Leaves
/// whose path misses the region are forced in.
inline StoppingRule rule_from_region(const ScenarioTree& tree, const StoppingRegion& region) {
  StoppingRule rule;
  std::vector<char> blocked(tree.nodes.size(), 0);  // strict ancestor already stopped
  for (const Node& n : tree.nodes) {
    const bool here = !blocked[static_cast<std::size_t>(n.id)] &&
                      (region.contains(n.id) || tree.is_leaf(n.id));
    if (here) rule.push_back(n.id);
    for (NodeId c : n.children)
      blocked[static_cast<std::size_t>(c)] =
          blocked[static_cast<std::size_t>(n.id)] || here;
  }
  return rule;
}

/// Marks the rule's nodes in a node-indexed flag buffer (scratch reuse).
inline void mark_rule(const StoppingRule& rule, std::vector<char>& flags, char value) {
  for (NodeId id : rule) flags[static_cast<std::size_t>(id)] = value;
}

}  // namespace rdg
