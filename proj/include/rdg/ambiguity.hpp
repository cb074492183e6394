#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rdg/errors.hpp"
#include "rdg/scenario_tree.hpp"

namespace rdg {

namespace defaults {
inline constexpr std::uint64_t policy_cap = 1'000'000;
inline constexpr double weight_tol = 1e-12;
}  // namespace defaults

/// One-step transition law attached to a control value. Weights are positional
/// over the node's children (in child order); zero weights are allowed so a
/// shared child set can host kernels with disjoint supports.
struct Kernel {
  double label = 0.0;
  std::vector<double> weights;
};

/// Per-node finite sets of kernels; the adapted choices among them make up the
/// prior family. Leaves carry empty menus.
struct KernelMenu {
  std::vector<std::vector<Kernel>> by_node;

  const std::vector<Kernel>& at(NodeId id) const {
    return by_node[static_cast<std::size_t>(id)];
  }
};

/// One kernel index per non-leaf node: a single prior out of the family.
struct Policy {
  std::vector<std::int32_t> choice;

  bool operator==(const Policy&) const = default;
};

/// Probability of reaching each node under one policy (leaf entries are the
/// induced path measure).
struct TreeMeasure {
  std::vector<double> node_prob;
};

inline void validate_menu(const ScenarioTree& tree, const KernelMenu& menu,
                          double weight_tol = defaults::weight_tol) {
  if (menu.by_node.size() != tree.nodes.size())
    raise(ErrorCode::ValidationError, "menu must cover every node");
  for (const Node& n : tree.nodes) {
    const auto& kernels = menu.at(n.id);
    if (tree.is_leaf(n.id)) continue;
    if (kernels.empty())
      raise(ErrorCode::ValidationError,
            "non-leaf node " + std::to_string(n.id) + " has an empty kernel menu");
    for (std::size_t k = 0; k < kernels.size(); ++k) {
      const Kernel& kern = kernels[k];
      if (kern.weights.size() != n.children.size())
        raise(ErrorCode::ValidationError,
              "kernel " + std::to_string(k) + " at node " + std::to_string(n.id) +
                  " must weight each child");
      double sum = 0.0;
      for (double w : kern.weights) {
        if (!(w >= 0.0) || !std::isfinite(w))
          raise(ErrorCode::ValidationError,
                "kernel " + std::to_string(k) + " at node " + std::to_string(n.id) +
                    " has a negative or non-finite weight");
        sum += w;
      }
      if (std::abs(sum - 1.0) > weight_tol)
        raise(ErrorCode::ValidationError,
              "kernel " + std::to_string(k) + " at node " + std::to_string(n.id) +
                  " weights sum to " + std::to_string(sum));
    }
  }
}

inline void validate_policy(const ScenarioTree& tree, const KernelMenu& menu,
                            const Policy& policy) {
  if (policy.choice.size() != tree.nodes.size())
    raise(ErrorCode::IncompletePolicy, "policy must assign a kernel to every non-leaf node");
  for (const Node& n : tree.nodes) {
    if (tree.is_leaf(n.id)) continue;
    const auto c = policy.choice[static_cast<std::size_t>(n.id)];
    if (c < 0 || static_cast<std::size_t>(c) >= menu.at(n.id).size())
      raise(ErrorCode::IncompletePolicy,
            "policy picks kernel " + std::to_string(c) + " at node " + std::to_string(n.id) +
                " but the menu has " + std::to_string(menu.at(n.id).size()));
  }
}

/// Law induced by a policy: reach probabilities multiply the chosen kernel
/// weights edge by edge.
inline TreeMeasure measure_of(const ScenarioTree& tree, const KernelMenu& menu,
                              const Policy& policy) {
  validate_policy(tree, menu, policy);
  TreeMeasure m;
  m.node_prob.assign(tree.nodes.size(), 0.0);
  m.node_prob[0] = 1.0;
  for (const Node& n : tree.nodes) {
    if (tree.is_leaf(n.id)) continue;
    const Kernel& kern = menu.at(n.id)[static_cast<std::size_t>(
        policy.choice[static_cast<std::size_t>(n.id)])];
    for (std::size_t c = 0; c < n.children.size(); ++c)
      m.node_prob[static_cast<std::size_t>(n.children[c])] =
          m.node_prob[static_cast<std::size_t>(n.id)] * kern.weights[c];
  }
  return m;
}

struct InfResult {
  double value = 0.0;
  int kernel = 0;
};

/// Minimum over the menu of the kernel-weighted child values; ties resolve to
/// the lowest kernel index.
inline InfResult one_step_inf_expectation(std::span<const Kernel> kernels,
                                          std::span<const double> child_values) {
  if (kernels.empty()) raise(ErrorCode::EmptyMenu, "no kernels at decision node");
  InfResult best{0.0, -1};
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    if (kernels[k].weights.size() != child_values.size())
      raise(ErrorCode::ValidationError, "kernel arity does not match the child values");
    double v = 0.0;
    for (std::size_t c = 0; c < child_values.size(); ++c)
      v += kernels[k].weights[c] * child_values[c];
    if (best.kernel < 0 || v < best.value) {
      best.value = v;
      best.kernel = static_cast<int>(k);
    }
  }
  return best;
}

/// E_P[xi] for xi given node-indexed values at the leaves.
inline double policy_expectation(const ScenarioTree& tree, const KernelMenu& menu,
                                 const Policy& policy, std::span<const double> leaf_values) {
  if (leaf_values.size() != tree.nodes.size())
    raise(ErrorCode::ValidationError, "leaf values must be node-indexed");
  const TreeMeasure m = measure_of(tree, menu, policy);
  double out = 0.0;
  for (NodeId leaf : tree.leaves())
    out += m.node_prob[static_cast<std::size_t>(leaf)] *
           leaf_values[static_cast<std::size_t>(leaf)];
  return out;
}

/// Number of adapted kernel choices, capped.
inline std::uint64_t policy_count(const ScenarioTree& tree, const KernelMenu& menu,
                                  std::uint64_t cap = defaults::policy_cap) {
  std::uint64_t count = 1;
  for (const Node& n : tree.nodes) {
    if (tree.is_leaf(n.id)) continue;
    const std::uint64_t size = menu.at(n.id).size();
    if (size == 0) raise(ErrorCode::EmptyMenu, "no kernels at node " + std::to_string(n.id));
    if (count > cap / size)
      raise(ErrorCode::EnumerationTooLarge,
            "policy family exceeds the cap of " + std::to_string(cap));
    count *= size;
  }
  return count;
}

/// Policy at a lexicographic index (node ids ascending, last node fastest).
inline Policy policy_at(const ScenarioTree& tree, const KernelMenu& menu, std::uint64_t index) {
  Policy p;
  p.choice.assign(tree.nodes.size(), 0);
  for (auto it = tree.nodes.rbegin(); it != tree.nodes.rend(); ++it) {
    if (tree.is_leaf(it->id)) continue;
    const std::uint64_t size = menu.at(it->id).size();
    p.choice[static_cast<std::size_t>(it->id)] = static_cast<std::int32_t>(index % size);
    index /= size;
  }
  return p;
}

/// Visits policies with index in [first, last) in lexicographic order. The
/// range split is what partitioned parallel iteration hangs off of.
template <typename Fn>
inline void for_each_policy_range(const ScenarioTree& tree, const KernelMenu& menu,
                                  std::uint64_t first, std::uint64_t last, Fn&& fn) {
  if (first >= last) return;
  Policy p = policy_at(tree, menu, first);
  std::vector<NodeId> decision_nodes;
  for (const Node& n : tree.nodes)
    if (!tree.is_leaf(n.id)) decision_nodes.push_back(n.id);
  for (std::uint64_t i = first; i < last; ++i) {
    fn(i, static_cast<const Policy&>(p));
    // odometer increment, last decision node fastest
    for (auto it = decision_nodes.rbegin(); it != decision_nodes.rend(); ++it) {
      auto& digit = p.choice[static_cast<std::size_t>(*it)];
      if (static_cast<std::size_t>(++digit) < menu.at(*it).size()) break;
      digit = 0;
    }
  }
}

template <typename Fn>
inline void for_each_policy(const ScenarioTree& tree, const KernelMenu& menu, Fn&& fn,
                            std::uint64_t cap = defaults::policy_cap) {
  const std::uint64_t count = policy_count(tree, menu, cap);
  for_each_policy_range(tree, menu, 0, count, std::forward<Fn>(fn));
}

struct PolicyPatch {
  std::vector<NodeId> region;  // nodes at the pasting depth
  Policy policy;
};

/// Pastes patch policies onto disjoint depth-s node sets: the result keeps the
/// base kernels before depth s and outside the patched subtrees, and adopts
/// each patch's kernels from its depth-s nodes downward. Always lands back in
/// the same policy family.
inline Policy paste_policies(const ScenarioTree& tree, const KernelMenu& menu,
                             const Policy& base, std::span<const PolicyPatch> patches, int s) {
  if (s < 0 || s > tree.grid.steps)
    raise(ErrorCode::DepthOutOfRange, "pasting depth " + std::to_string(s));
  validate_policy(tree, menu, base);
  std::vector<char> taken(tree.nodes.size(), 0);
  Policy result = base;
  for (const PolicyPatch& patch : patches) {
    validate_policy(tree, menu, patch.policy);
    for (NodeId a : patch.region) {
      if (tree.node(a).depth != s)
        raise(ErrorCode::DepthMismatch,
              "patched node " + std::to_string(a) + " is not at depth " + std::to_string(s));
      if (taken[static_cast<std::size_t>(a)])
        raise(ErrorCode::OverlappingPartition,
              "node " + std::to_string(a) + " appears in two patch sets");
      taken[static_cast<std::size_t>(a)] = 1;
      std::vector<NodeId> stack{a};
      while (!stack.empty()) {
        const NodeId x = stack.back();
        stack.pop_back();
        if (tree.is_leaf(x)) continue;
        result.choice[static_cast<std::size_t>(x)] =
            patch.policy.choice[static_cast<std::size_t>(x)];
        for (NodeId c : tree.node(x).children) stack.push_back(c);
      }
    }
  }
  return result;
}

/// True iff the two induced measures put mass on disjoint leaf sets.
inline bool mutually_singular(const ScenarioTree& tree, const KernelMenu& menu,
                              const Policy& p1, const Policy& p2) {
  const TreeMeasure m1 = measure_of(tree, menu, p1);
  const TreeMeasure m2 = measure_of(tree, menu, p2);
  for (NodeId leaf : tree.leaves()) {
    const auto i = static_cast<std::size_t>(leaf);
    if (m1.node_prob[i] > 0.0 && m2.node_prob[i] > 0.0) return false;
  }
  return true;
}

}  // namespace rdg
