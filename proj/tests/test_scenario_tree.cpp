#include <catch_amalgamated.hpp>

#include <random>

#include <json.hpp>

#include "rdg/scenario_tree.hpp"

using namespace rdg;

namespace {

ScenarioTree binary_tree(int steps) {
  return build_tree(TimeGrid{1.0, steps}, additive_branching({1.0, -1.0}));
}

}  // namespace

TEST_CASE("build_tree produces the expected shapes") {
  const ScenarioTree t1 = binary_tree(1);
  REQUIRE(t1.node_count() == 3);
  CHECK(t1.node(1).state[0] == 1.0);
  CHECK(t1.node(2).state[0] == -1.0);

  const ScenarioTree t2 = binary_tree(2);
  REQUIRE(t2.node_count() == 7);
  CHECK(t2.leaves().size() == 4);

  const ScenarioTree t3 = build_tree(TimeGrid{1.0, 3}, additive_branching({1.0, 0.0, -1.0}));
  REQUIRE(t3.node_count() == 40);
  CHECK(t3.leaves().size() == 27);
}

TEST_CASE("build_tree error paths") {
  const BranchGenerator empty = [](const ScenarioTree&, NodeId) {
    return std::vector<std::vector<double>>{};
  };
  CHECK_THROWS_MATCHES(build_tree(TimeGrid{1.0, 1}, empty), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::EmptyBranching;
                       }));
  CHECK_THROWS_MATCHES(build_tree(TimeGrid{1.0, 4}, additive_branching({1.0, -1.0}), 1, 10),
                       Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::SizeLimit;
                       }));
  CHECK_THROWS_AS(build_tree(TimeGrid{0.0, 1}, additive_branching({1.0})), Error);
}

TEST_CASE("path_of walks root to node") {
  const ScenarioTree t = binary_tree(2);
  const auto root_path = t.path_of(t.root());
  REQUIRE(root_path.size() == 1);
  CHECK(root_path[0][0] == 0.0);

  // leaf reached by two up moves sits at +2 with history [0, 1, 2]
  NodeId up_up = t.node(t.node(t.root()).children[0]).children[0];
  const auto path = t.path_of(up_up);
  REQUIRE(path.size() == 3);
  CHECK(path[0][0] == 0.0);
  CHECK(path[1][0] == 1.0);
  CHECK(path[2][0] == 2.0);

  // parent path is a prefix of the child path
  for (const Node& n : t.nodes) {
    if (n.parent == kNoParent) continue;
    const auto parent_path = t.path_of(n.parent);
    const auto child_path = t.path_of(n.id);
    REQUIRE(child_path.size() == parent_path.size() + 1);
    for (std::size_t i = 0; i < parent_path.size(); ++i)
      CHECK(child_path[i] == parent_path[i]);
    CHECK(child_path.back() == n.state);
  }

  CHECK_THROWS_MATCHES(t.path_of(99), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::UnknownNode;
                       }));
}

TEST_CASE("nodes_at_depth partitions the tree") {
  const ScenarioTree t = binary_tree(2);
  CHECK(t.nodes_at_depth(0) == std::vector<NodeId>{0});
  CHECK(t.nodes_at_depth(2).size() == 4);
  std::size_t total = 0;
  for (int k = 0; k <= 2; ++k) total += t.nodes_at_depth(k).size();
  CHECK(total == t.nodes.size());
  CHECK_THROWS_MATCHES(t.nodes_at_depth(3), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::DepthOutOfRange;
                       }));
}

TEST_CASE("structural invariants hold on a random tree") {
  std::mt19937_64 rng(7);
  const BranchGenerator random_branching = [&rng](const ScenarioTree& tree, NodeId parent) {
    std::uniform_int_distribution<int> arity(1, 3);
    std::uniform_real_distribution<double> delta(-1.0, 1.0);
    std::vector<std::vector<double>> out;
    for (int i = 0, n = arity(rng); i < n; ++i)
      out.push_back({tree.node(parent).state[0] + delta(rng)});
    return out;
  };
  const ScenarioTree t = build_tree(TimeGrid{2.0, 4}, random_branching);
  for (const Node& n : t.nodes) {
    if (n.parent != kNoParent) {
      CHECK(n.depth == t.node(n.parent).depth + 1);
      CHECK(n.parent < n.id);
    }
    for (NodeId c : n.children) CHECK(c > n.id);
  }
  t.validate();
}

TEST_CASE("tree json round trip is exact") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> delta(-1.0, 1.0);
  const BranchGenerator jitter = [&](const ScenarioTree& tree, NodeId parent) {
    return std::vector<std::vector<double>>{{tree.node(parent).state[0] + delta(rng)},
                                            {tree.node(parent).state[0] - delta(rng)}};
  };
  const ScenarioTree t = build_tree(TimeGrid{1.7, 3}, jitter);
  nlohmann::ordered_json j;
  to_json(j, t);
  const ScenarioTree back = tree_from_json(nlohmann::json::parse(j.dump()));
  REQUIRE(back.node_count() == t.node_count());
  CHECK(back.grid.horizon == t.grid.horizon);
  for (const Node& n : t.nodes) {
    CHECK(back.node(n.id).depth == n.depth);
    CHECK(back.node(n.id).parent == n.parent);
    CHECK(back.node(n.id).children == n.children);
    REQUIRE(back.node(n.id).state.size() == n.state.size());
    for (std::size_t i = 0; i < n.state.size(); ++i)
      CHECK(back.node(n.id).state[i] == n.state[i]);  // bitwise round trip
  }
}
