#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "rdg/errors.hpp"
#include "rdg/scenario_tree.hpp"

namespace rdg {

enum class PayoffKind { table, linear, asian_put, lookback_spread };

inline const char* to_string(PayoffKind k) {
  switch (k) {
    case PayoffKind::table: return "table";
    case PayoffKind::linear: return "linear";
    case PayoffKind::asian_put: return "asian_put";
    case PayoffKind::lookback_spread: return "lookback_spread";
  }
  return "?";
}

/// value = dot(state_coef, state) + time_coef * t + constant
struct AffineCoef {
  std::vector<double> state_coef;
  double time_coef = 0.0;
  double constant = 0.0;

  double eval(const std::vector<double>& state, double t) const {
    double v = constant + time_coef * t;
    const std::size_t m = std::min(state_coef.size(), state.size());
    for (std::size_t i = 0; i < m; ++i) v += state_coef[i] * state[i];
    return v;
  }
};

/// Running reward g and the two obstacles L <= U, evaluated at tree nodes.
/// `table` holds explicit per-node values; the other kinds are closed-form
/// families, the last two genuinely path-dependent.
struct PayoffSpec {
  PayoffKind kind = PayoffKind::table;

  // table
  std::unordered_map<NodeId, double> g_table, l_table, u_table;
  bool has_g_table = false;

  // linear
  AffineCoef g_lin, l_lin, u_lin;

  // asian_put / lookback_spread
  double strike = 0.0;
  double offset = 0.0;
  double spread = 0.0;
};

/// Realized stopping depths of the two players along one path.
struct StopPair {
  int tau_depth = 0;
  int gamma_depth = 0;
};

namespace detail {

inline double table_lookup(const std::unordered_map<NodeId, double>& table, NodeId id,
                           const char* which) {
  auto it = table.find(id);
  if (it == table.end())
    raise(ErrorCode::MissingTableEntry,
          std::string(which) + " table has no entry for node " + std::to_string(id));
  return it->second;
}

inline double running_average(const ScenarioTree& tree, NodeId id) {
  const Node* n = &tree.node(id);
  double sum = 0.0;
  int count = n->depth + 1;
  while (true) {
    sum += n->state[0];
    if (n->parent == kNoParent) break;
    n = &tree.node(n->parent);
  }
  return sum / count;
}

inline double running_max(const ScenarioTree& tree, NodeId id) {
  const Node* n = &tree.node(id);
  double best = n->state[0];
  while (n->parent != kNoParent) {
    n = &tree.node(n->parent);
    best = std::max(best, n->state[0]);
  }
  return best;
}

}  // namespace detail

inline double eval_g(const PayoffSpec& spec, const ScenarioTree& tree, NodeId id) {
  switch (spec.kind) {
    case PayoffKind::table:
      if (!spec.has_g_table) return 0.0;
      return detail::table_lookup(spec.g_table, id, "g");
    case PayoffKind::linear: {
      const Node& n = tree.node(id);
      return spec.g_lin.eval(n.state, tree.grid.time_at(n.depth));
    }
    case PayoffKind::asian_put:
    case PayoffKind::lookback_spread:
      tree.node(id);
      return 0.0;  // these families carry no running reward
  }
  return 0.0;
}

inline double eval_L(const PayoffSpec& spec, const ScenarioTree& tree, NodeId id) {
  switch (spec.kind) {
    case PayoffKind::table:
      return detail::table_lookup(spec.l_table, id, "L");
    case PayoffKind::linear: {
      const Node& n = tree.node(id);
      return spec.l_lin.eval(n.state, tree.grid.time_at(n.depth));
    }
    case PayoffKind::asian_put:
      return std::max(spec.strike - detail::running_average(tree, id), 0.0) - spec.offset;
    case PayoffKind::lookback_spread:
      return detail::running_max(tree, id) - tree.node(id).state[0] - spec.offset;
  }
  return 0.0;
}

inline double eval_U(const PayoffSpec& spec, const ScenarioTree& tree, NodeId id) {
  switch (spec.kind) {
    case PayoffKind::table:
      return detail::table_lookup(spec.u_table, id, "U");
    case PayoffKind::linear: {
      const Node& n = tree.node(id);
      return spec.u_lin.eval(n.state, tree.grid.time_at(n.depth));
    }
    case PayoffKind::asian_put:
    case PayoffKind::lookback_spread:
      return eval_L(spec, tree, id) + spec.spread;
  }
  return 0.0;
}

/// Psi = max(-L, U, 0), the envelope dominating every realizable payoff.
inline double eval_psi(const PayoffSpec& spec, const ScenarioTree& tree, NodeId id) {
  return std::max({-eval_L(spec, tree, id), eval_U(spec, tree, id), 0.0});
}

/// Total payoff to Player 1 along the path to `leaf` when the players stop at
/// the given depths: accumulated reward up to the quit depth plus L if Player 1
/// quits first or ties, U if Player 2 quits strictly first.
inline double eval_R(const PayoffSpec& spec, const ScenarioTree& tree, NodeId leaf,
                     const StopPair& pair) {
  const int n_steps = tree.grid.steps;
  if (tree.node(leaf).depth != n_steps)
    raise(ErrorCode::ValidationError, "eval_R expects a leaf node");
  if (pair.tau_depth < 0 || pair.tau_depth > n_steps || pair.gamma_depth < 0 ||
      pair.gamma_depth > n_steps)
    raise(ErrorCode::ValidationError, "stopping depths must lie in [0, N]");
  const int quit = std::min(pair.tau_depth, pair.gamma_depth);
  const auto path = tree.path_nodes(leaf);
  const double dt = tree.grid.dt();
  double acc = 0.0;
  for (int k = 0; k < quit; ++k) acc += eval_g(spec, tree, path[static_cast<std::size_t>(k)]) * dt;
  const NodeId at = path[static_cast<std::size_t>(quit)];
  return acc + (pair.tau_depth <= pair.gamma_depth ? eval_L(spec, tree, at)
                                                   : eval_U(spec, tree, at));
}

/// Checks L <= U at interior nodes and finiteness everywhere; in triplet mode
/// additionally g == 0, L == U at leaves and |L|, |U| <= m0.
inline void validate_payoff(const PayoffSpec& spec, const ScenarioTree& tree,
                            bool triplet_mode = false, double m0 = 1e6) {
  const int n_steps = tree.grid.steps;
  for (const Node& n : tree.nodes) {
    const double l = eval_L(spec, tree, n.id);
    const double u = eval_U(spec, tree, n.id);
    const double g = eval_g(spec, tree, n.id);
    if (!std::isfinite(l) || !std::isfinite(u) || !std::isfinite(g))
      raise(ErrorCode::ValidationError,
            "payoff is not finite at node " + std::to_string(n.id));
    if (n.depth < n_steps && l > u)
      raise(ErrorCode::ValidationError,
            "L > U at node " + std::to_string(n.id) + " (L=" + std::to_string(l) +
                ", U=" + std::to_string(u) + ")");
    if (triplet_mode) {
      if (g != 0.0)
        raise(ErrorCode::ValidationError,
              "triplet mode needs g == 0, violated at node " + std::to_string(n.id));
      if (n.depth == n_steps && l != u)
        raise(ErrorCode::ValidationError,
              "triplet mode needs L == U at leaf " + std::to_string(n.id));
      if (std::abs(l) > m0 || std::abs(u) > m0)
        raise(ErrorCode::ValidationError,
              "triplet mode needs |L|, |U| <= " + std::to_string(m0) + ", violated at node " +
                  std::to_string(n.id));
    }
  }
}

/// Worst slack of |R| <= sum |g| dt + Psi_(tau ^ gamma) over all leaves and all
/// stop pairs; must come out <= 0. Throws BoundViolated past the tolerance.
inline double check_payoff_bound(const PayoffSpec& spec, const ScenarioTree& tree,
                                 double tol = 1e-12) {
  const int n_steps = tree.grid.steps;
  const double dt = tree.grid.dt();
  double worst = -std::numeric_limits<double>::infinity();
  NodeId worst_leaf = 0;
  StopPair worst_pair{};
  for (NodeId leaf : tree.leaves()) {
    const auto path = tree.path_nodes(leaf);
    double abs_g = 0.0;
    for (int quit = 0; quit <= n_steps; ++quit) {
      const NodeId at = path[static_cast<std::size_t>(quit)];
      const double psi = eval_psi(spec, tree, at);
      // two cases: Player 1 first or tied (pays L), Player 2 strictly first (pays U)
      std::vector<StopPair> pairs{{quit, n_steps}};
      if (quit < n_steps) pairs.push_back({n_steps, quit});
      for (const StopPair& pair : pairs) {
        const double r = eval_R(spec, tree, leaf, pair);
        const double slack = std::abs(r) - (abs_g + psi);
        if (slack > worst) {
          worst = slack;
          worst_leaf = leaf;
          worst_pair = pair;
        }
      }
      if (quit < n_steps) abs_g += std::abs(eval_g(spec, tree, at)) * dt;
    }
  }
  if (worst > tol)
    raise(ErrorCode::BoundViolated,
          "payoff bound violated by " + std::to_string(worst) + " at leaf " +
              std::to_string(worst_leaf) + " with stops (" +
              std::to_string(worst_pair.tau_depth) + ", " +
              std::to_string(worst_pair.gamma_depth) + ")");
  return worst;
}

inline void to_json(nlohmann::ordered_json& j, const PayoffSpec& spec) {
  j = nlohmann::ordered_json::object();
  j["kind"] = to_string(spec.kind);
  auto table_json = [](const std::unordered_map<NodeId, double>& t) {
    std::vector<NodeId> ids;
    ids.reserve(t.size());
    for (const auto& [id, _] : t) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (NodeId id : ids) out[std::to_string(id)] = t.at(id);
    return out;
  };
  auto affine_json = [](const AffineCoef& c) {
    return nlohmann::ordered_json{
        {"state", c.state_coef}, {"time", c.time_coef}, {"const", c.constant}};
  };
  switch (spec.kind) {
    case PayoffKind::table:
      if (spec.has_g_table) j["g"] = table_json(spec.g_table);
      j["L"] = table_json(spec.l_table);
      j["U"] = table_json(spec.u_table);
      break;
    case PayoffKind::linear:
      j["params"] = {{"g", affine_json(spec.g_lin)},
                     {"L", affine_json(spec.l_lin)},
                     {"U", affine_json(spec.u_lin)}};
      break;
    case PayoffKind::asian_put:
      j["params"] = {{"strike", spec.strike}, {"offset", spec.offset}, {"spread", spec.spread}};
      break;
    case PayoffKind::lookback_spread:
      j["params"] = {{"offset", spec.offset}, {"spread", spec.spread}};
      break;
  }
}

inline PayoffSpec payoff_from_json(const nlohmann::json& j) {
  PayoffSpec spec;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    auto parse_table = [](const nlohmann::json& t) {
      std::unordered_map<NodeId, double> out;
      for (auto it = t.begin(); it != t.end(); ++it)
        out[static_cast<NodeId>(std::stoll(it.key()))] = it.value().get<double>();
      return out;
    };
    auto parse_affine = [](const nlohmann::json& c) {
      AffineCoef out;
      if (c.contains("state")) {
        if (c.at("state").is_number())
          out.state_coef = {c.at("state").get<double>()};
        else
          out.state_coef = c.at("state").get<std::vector<double>>();
      }
      out.time_coef = c.value("time", 0.0);
      out.constant = c.value("const", 0.0);
      return out;
    };
    if (kind == "table") {
      spec.kind = PayoffKind::table;
      if (j.contains("g")) {
        spec.has_g_table = true;
        spec.g_table = parse_table(j.at("g"));
      }
      spec.l_table = parse_table(j.at("L"));
      spec.u_table = parse_table(j.at("U"));
    } else if (kind == "linear") {
      spec.kind = PayoffKind::linear;
      const auto& p = j.at("params");
      if (p.contains("g")) spec.g_lin = parse_affine(p.at("g"));
      spec.l_lin = parse_affine(p.at("L"));
      spec.u_lin = parse_affine(p.at("U"));
    } else if (kind == "asian_put") {
      spec.kind = PayoffKind::asian_put;
      const auto& p = j.at("params");
      spec.strike = p.at("strike").get<double>();
      spec.offset = p.value("offset", 0.0);
      spec.spread = p.value("spread", 0.0);
    } else if (kind == "lookback_spread") {
      spec.kind = PayoffKind::lookback_spread;
      const auto& p = j.at("params");
      spec.offset = p.value("offset", 0.0);
      spec.spread = p.value("spread", 0.0);
    } else {
      raise(ErrorCode::ParseError, "payoff.kind: unknown kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, std::string("payoff block: ") + e.what());
  } catch (const std::invalid_argument&) {
    raise(ErrorCode::ParseError, "payoff block: table keys must be integer node ids");
  }
  return spec;
}

}  // namespace rdg
