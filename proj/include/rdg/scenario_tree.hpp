#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rdg/errors.hpp"

namespace rdg {

using NodeId = std::int64_t;
inline constexpr NodeId kNoParent = -1;

namespace defaults {
inline constexpr std::int64_t node_cap = 2'000'000;
}  // namespace defaults

/// Uniform time grid t_k = k*T/N, k = 0..N.
struct TimeGrid {
  double horizon = 1.0;
  int steps = 1;

  double dt() const { return horizon / steps; }
  double time_at(int k) const { return horizon * k / steps; }

  void validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
      raise(ErrorCode::ValidationError, "time grid horizon must be finite and > 0");
    if (steps < 1)
      raise(ErrorCode::ValidationError, "time grid needs at least one step");
  }
};

struct Node {
  NodeId id = 0;
  int depth = 0;
  std::vector<double> state;
  NodeId parent = kNoParent;
  std::vector<NodeId> children;
};

/// Finite rooted tree of path scenarios. Nodes are stored in depth order with
/// dense ids, so one index-ascending pass visits parents before children and
/// one descending pass is a backward sweep. Immutable once finalized.
class ScenarioTree {
 public:
  TimeGrid grid;
  std::vector<Node> nodes;

  NodeId root() const { return 0; }

  const Node& node(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes.size()))
      raise(ErrorCode::UnknownNode, "node id " + std::to_string(id));
    return nodes[static_cast<std::size_t>(id)];
  }

  std::int64_t node_count() const { return static_cast<std::int64_t>(nodes.size()); }
  bool is_leaf(NodeId id) const { return node(id).depth == grid.steps; }
  int dimension() const { return nodes.empty() ? 0 : static_cast<int>(nodes.front().state.size()); }

  const std::vector<NodeId>& nodes_at_depth(int k) const {
    if (k < 0 || k > grid.steps)
      raise(ErrorCode::DepthOutOfRange, "depth " + std::to_string(k) + " not in [0, " +
                                            std::to_string(grid.steps) + "]");
    return depth_index_[static_cast<std::size_t>(k)];
  }

  const std::vector<NodeId>& leaves() const { return depth_index_.back(); }

  /// Node ids along root -> node, inclusive.
  std::vector<NodeId> path_nodes(NodeId id) const {
    const Node* n = &node(id);
    std::vector<NodeId> path(static_cast<std::size_t>(n->depth) + 1);
    for (int k = n->depth; k >= 0; --k) {
      path[static_cast<std::size_t>(k)] = n->id;
      if (n->parent != kNoParent) n = &node(n->parent);
    }
    return path;
  }

  /// State sequence along root -> node; length = depth + 1.
  std::vector<std::vector<double>> path_of(NodeId id) const {
    std::vector<std::vector<double>> states;
    for (NodeId p : path_nodes(id)) states.push_back(node(p).state);
    return states;
  }

  /// Rebuild the per-depth index. Call after mutating `nodes`.
  void finalize() {
    grid.validate();
    depth_index_.assign(static_cast<std::size_t>(grid.steps) + 1, {});
    for (const Node& n : nodes) {
      if (n.depth < 0 || n.depth > grid.steps)
        raise(ErrorCode::ValidationError,
              "node " + std::to_string(n.id) + " has depth outside the grid");
      depth_index_[static_cast<std::size_t>(n.depth)].push_back(n.id);
    }
  }

  void validate() const {
    grid.validate();
    if (nodes.empty()) raise(ErrorCode::ValidationError, "tree has no nodes");
    if (nodes.front().depth != 0 || nodes.front().parent != kNoParent)
      raise(ErrorCode::ValidationError, "node 0 must be the root");
    const int d = dimension();
    if (d < 1) raise(ErrorCode::ValidationError, "state dimension must be >= 1");
    for (double x : nodes.front().state)
      if (x != 0.0) raise(ErrorCode::ValidationError, "root state must be the origin");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& n = nodes[i];
      if (n.id != static_cast<NodeId>(i))
        raise(ErrorCode::ValidationError, "node ids must be dense and in storage order");
      if (static_cast<int>(n.state.size()) != d)
        raise(ErrorCode::ValidationError,
              "node " + std::to_string(n.id) + " has mismatched state dimension");
      for (double x : n.state)
        if (!std::isfinite(x))
          raise(ErrorCode::ValidationError, "node " + std::to_string(n.id) + " has non-finite state");
      if (n.id != 0) {
        if (n.parent == kNoParent)
          raise(ErrorCode::ValidationError, "non-root node " + std::to_string(n.id) + " lacks a parent");
        const Node& p = node(n.parent);
        if (n.depth != p.depth + 1)
          raise(ErrorCode::ValidationError,
                "node " + std::to_string(n.id) + " depth must be parent depth + 1");
        if (p.id >= n.id)
          raise(ErrorCode::ValidationError, "edges must satisfy parent id < child id");
      }
      if (n.depth < grid.steps && n.children.empty())
        raise(ErrorCode::ValidationError,
              "interior node " + std::to_string(n.id) + " has no children");
      if (n.depth == grid.steps && !n.children.empty())
        raise(ErrorCode::ValidationError, "leaf " + std::to_string(n.id) + " has children");
      for (NodeId c : n.children)
        if (node(c).parent != n.id)
          raise(ErrorCode::ValidationError,
                "child link " + std::to_string(n.id) + " -> " + std::to_string(c) +
                    " has no matching parent link");
    }
    if (depth_index_.size() != static_cast<std::size_t>(grid.steps) + 1)
      raise(ErrorCode::ValidationError, "tree not finalized");
  }

 private:
  std::vector<std::vector<NodeId>> depth_index_;
};

/// Emits the child states of `parent`; the partially built tree already
/// contains the full path to `parent`, so generators may be path-dependent.
using BranchGenerator =
    std::function<std::vector<std::vector<double>>(const ScenarioTree&, NodeId)>;

inline ScenarioTree build_tree(const TimeGrid& grid, const BranchGenerator& branching,
                               int dimension = 1,
                               std::int64_t max_nodes = defaults::node_cap) {
  grid.validate();
  ScenarioTree tree;
  tree.grid = grid;
  tree.nodes.push_back(Node{0, 0, std::vector<double>(static_cast<std::size_t>(dimension), 0.0),
                            kNoParent, {}});
  NodeId next = 1;
  std::size_t frontier_begin = 0;
  for (int depth = 0; depth < grid.steps; ++depth) {
    const std::size_t frontier_end = tree.nodes.size();
    for (std::size_t i = frontier_begin; i < frontier_end; ++i) {
      auto states = branching(tree, static_cast<NodeId>(i));
      if (states.empty())
        raise(ErrorCode::EmptyBranching,
              "generator produced no children for node " + std::to_string(i));
      for (auto& s : states) {
        if (static_cast<int>(s.size()) != dimension)
          raise(ErrorCode::ValidationError, "generated child state has wrong dimension");
        if (next >= max_nodes)
          raise(ErrorCode::SizeLimit,
                "tree exceeds the node cap of " + std::to_string(max_nodes));
        tree.nodes[i].children.push_back(next);
        tree.nodes.push_back(Node{next, depth + 1, std::move(s), static_cast<NodeId>(i), {}});
        ++next;
      }
    }
    frontier_begin = frontier_end;
  }
  tree.finalize();
  tree.validate();
  return tree;
}

/// Children at parent state + increment, one child per increment (d = 1).
inline BranchGenerator additive_branching(std::vector<double> increments) {
  return [inc = std::move(increments)](const ScenarioTree& tree, NodeId parent) {
    std::vector<std::vector<double>> out;
    out.reserve(inc.size());
    for (double delta : inc) out.push_back({tree.node(parent).state[0] + delta});
    return out;
  };
}

inline void to_json(nlohmann::ordered_json& j, const ScenarioTree& tree) {
  j = nlohmann::ordered_json::object();
  j["grid"] = {{"T", tree.grid.horizon}, {"N", tree.grid.steps}};
  auto arr = nlohmann::ordered_json::array();
  for (const Node& n : tree.nodes) {
    nlohmann::ordered_json nj;
    nj["id"] = n.id;
    nj["depth"] = n.depth;
    nj["state"] = n.state;
    if (n.parent == kNoParent)
      nj["parent"] = nullptr;
    else
      nj["parent"] = n.parent;
    nj["children"] = n.children;
    arr.push_back(std::move(nj));
  }
  j["nodes"] = std::move(arr);
}

inline ScenarioTree tree_from_json(const nlohmann::json& j) {
  ScenarioTree tree;
  try {
    tree.grid.horizon = j.at("grid").at("T").get<double>();
    tree.grid.steps = j.at("grid").at("N").get<int>();
    for (const auto& nj : j.at("nodes")) {
      Node n;
      n.id = nj.at("id").get<NodeId>();
      n.depth = nj.at("depth").get<int>();
      n.state = nj.at("state").get<std::vector<double>>();
      n.parent = nj.at("parent").is_null() ? kNoParent : nj.at("parent").get<NodeId>();
      n.children = nj.at("children").get<std::vector<NodeId>>();
      tree.nodes.push_back(std::move(n));
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, std::string("tree block: ") + e.what());
  }
  tree.finalize();
  tree.validate();
  return tree;
}

}  // namespace rdg
