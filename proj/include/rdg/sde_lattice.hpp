#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rdg/ambiguity.hpp"
#include "rdg/errors.hpp"
#include "rdg/scenario_tree.hpp"

namespace rdg {

enum class DriftFamily { zero, constant, linear, running_max };

inline const char* to_string(DriftFamily f) {
  switch (f) {
    case DriftFamily::zero: return "zero";
    case DriftFamily::constant: return "constant";
    case DriftFamily::linear: return "linear";
    case DriftFamily::running_max: return "running_max";
  }
  return "?";
}

/// Euler lattice description of a controlled diffusion: per step the state
/// moves by drift(time, path, control) * dt + control * sqrt(dt) * shock. The
/// control menu lists volatility levels bounded by kappa. In singular mode
/// every control spawns its own child block so the induced priors sit on
/// disjoint supports; otherwise the children come from the first control and
/// the other controls only reweight them (drift-style, dominated ambiguity).
struct SdeSpec {
  int dimension = 1;
  double horizon = 1.0;
  int steps = 1;
  DriftFamily drift = DriftFamily::zero;
  double drift_value = 0.0;  // constant value, or the slope for linear/running_max
  std::vector<double> controls;
  double kappa = 1.0;
  bool singular = true;
  std::vector<double> shocks = {-1.0, 1.0};
};

/// drift b(k, path, u): path is the state sequence up to the current node.
inline std::vector<double> drift_eval(const SdeSpec& spec, int /*step*/,
                                      const std::vector<std::vector<double>>& path,
                                      double /*control*/) {
  const std::vector<double>& x = path.back();
  std::vector<double> b(x.size(), 0.0);
  switch (spec.drift) {
    case DriftFamily::zero:
      break;
    case DriftFamily::constant:
      std::fill(b.begin(), b.end(), spec.drift_value);
      break;
    case DriftFamily::linear:
      for (std::size_t i = 0; i < x.size(); ++i) b[i] = spec.drift_value * x[i];
      break;
    case DriftFamily::running_max:
      for (std::size_t i = 0; i < x.size(); ++i) {
        double peak = path.front()[i];
        for (const auto& s : path) peak = std::max(peak, s[i]);
        b[i] = spec.drift_value * peak;
      }
      break;
  }
  return b;
}

inline void validate_sde(const SdeSpec& spec) {
  if (spec.dimension < 1) raise(ErrorCode::ValidationError, "sde dimension must be >= 1");
  if (!(spec.horizon > 0.0)) raise(ErrorCode::ValidationError, "sde horizon must be > 0");
  if (spec.steps < 1) raise(ErrorCode::ValidationError, "sde needs at least one step");
  if (!(spec.kappa > 0.0)) raise(ErrorCode::ValidationError, "kappa must be > 0");
  if (spec.controls.empty()) raise(ErrorCode::ValidationError, "control menu is empty");
  for (double u : spec.controls)
    if (std::abs(u) > spec.kappa)
      raise(ErrorCode::InvalidControl,
            "control " + std::to_string(u) + " exceeds the bound kappa = " +
                std::to_string(spec.kappa));
  if (spec.shocks.empty()) raise(ErrorCode::ValidationError, "shock set is empty");
  if (!spec.singular && spec.shocks != std::vector<double>{-1.0, 1.0})
    raise(ErrorCode::ValidationError,
          "dominated mode requires the Bernoulli shock set {-1, +1}");
  if ((spec.drift == DriftFamily::linear || spec.drift == DriftFamily::running_max) &&
      std::abs(spec.drift_value) > spec.kappa)
    raise(ErrorCode::ValidationError,
          "drift slope must respect the Lipschitz bound kappa");
}

struct Lattice {
  ScenarioTree tree;
  KernelMenu menu;
};

namespace detail {

/// All shock vectors in {shocks}^d, first coordinate most significant.
inline std::vector<std::vector<double>> shock_vectors(const SdeSpec& spec) {
  std::vector<std::vector<double>> out{{}};
  for (int i = 0; i < spec.dimension; ++i) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : out)
      for (double s : spec.shocks) {
        auto v = prefix;
        v.push_back(s);
        next.push_back(std::move(v));
      }
    out = std::move(next);
  }
  return out;
}

}  // namespace detail

inline Lattice build_lattice(const SdeSpec& spec,
                             std::int64_t max_nodes = defaults::node_cap) {
  validate_sde(spec);
  const auto shocks = detail::shock_vectors(spec);
  const double dt = spec.horizon / spec.steps;
  const double sqrt_dt = std::sqrt(dt);

  auto child_state = [&](const std::vector<double>& parent, const std::vector<double>& b,
                         double u, const std::vector<double>& shock) {
    std::vector<double> x(parent.size());
    for (std::size_t i = 0; i < parent.size(); ++i)
      x[i] = parent[i] + b[i] * dt + u * sqrt_dt * shock[i];
    return x;
  };

  BranchGenerator branching = [&](const ScenarioTree& partial, NodeId parent) {
    const auto path = partial.path_of(parent);
    const int step = partial.node(parent).depth;
    std::vector<std::vector<double>> children;
    if (spec.singular) {
      for (double u : spec.controls) {
        const auto b = drift_eval(spec, step, path, u);
        for (const auto& shock : shocks)
          children.push_back(child_state(path.back(), b, u, shock));
      }
    } else {
      const double u0 = spec.controls.front();
      const auto b = drift_eval(spec, step, path, u0);
      for (const auto& shock : shocks)
        children.push_back(child_state(path.back(), b, u0, shock));
    }
    return children;
  };

  Lattice lattice;
  lattice.tree = build_tree(TimeGrid{spec.horizon, spec.steps}, branching, spec.dimension,
                            max_nodes);

  lattice.menu.by_node.assign(lattice.tree.nodes.size(), {});
  const std::size_t block = shocks.size();
  for (const Node& n : lattice.tree.nodes) {
    if (lattice.tree.is_leaf(n.id)) continue;
    auto& kernels = lattice.menu.by_node[static_cast<std::size_t>(n.id)];
    if (spec.singular) {
      for (std::size_t c = 0; c < spec.controls.size(); ++c) {
        Kernel k;
        k.label = spec.controls[c];
        k.weights.assign(n.children.size(), 0.0);
        for (std::size_t s = 0; s < block; ++s) k.weights[c * block + s] = 1.0 / block;
        kernels.push_back(std::move(k));
      }
    } else {
      // reweight the reference children so the one-step mean matches each
      // control's drift; requires the mesh to keep the weights in [0, 1]
      const auto path = lattice.tree.path_of(n.id);
      const double u0 = spec.controls.front();
      const auto b0 = drift_eval(spec, n.depth, path, u0);
      for (double u : spec.controls) {
        const auto bu = drift_eval(spec, n.depth, path, u);
        Kernel k;
        k.label = u;
        k.weights.assign(n.children.size(), 0.0);
        std::vector<double> up(static_cast<std::size_t>(spec.dimension));
        for (int i = 0; i < spec.dimension; ++i) {
          up[static_cast<std::size_t>(i)] =
              0.5 + (bu[static_cast<std::size_t>(i)] - b0[static_cast<std::size_t>(i)]) *
                        std::sqrt(dt) / (2.0 * u0);
          if (up[static_cast<std::size_t>(i)] < 0.0 || up[static_cast<std::size_t>(i)] > 1.0)
            raise(ErrorCode::ValidationError,
                  "time step too coarse to reweight the drift of control " + std::to_string(u));
        }
        for (std::size_t s = 0; s < shocks.size(); ++s) {
          double w = 1.0;
          for (int i = 0; i < spec.dimension; ++i)
            w *= shocks[s][static_cast<std::size_t>(i)] > 0.0
                     ? up[static_cast<std::size_t>(i)]
                     : 1.0 - up[static_cast<std::size_t>(i)];
          k.weights[s] = w;
        }
        kernels.push_back(std::move(k));
      }
    }
  }
  validate_menu(lattice.tree, lattice.menu);
  return lattice;
}

struct ScalingRow {
  int steps = 0;
  double delta = 0.0;       // step size T / steps
  double window = 0.0;      // window length in time
  double expected_sup = 0.0;
  double ratio = 0.0;       // expected_sup / sqrt(window)
};

namespace detail {

/// Exact E[max over the window of |X - X_start|] below `start`, under the
/// uniform-shock reference measure (kernel 0 everywhere).
inline double window_sup_expectation(const ScenarioTree& tree, const KernelMenu& menu,
                                     NodeId start, int window_steps) {
  struct Item {
    NodeId id;
    double prob;
    double peak;
    int depth_left;
  };
  const std::vector<double>& origin = tree.node(start).state;
  auto distance = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - origin[i];
      s += d * d;
    }
    return std::sqrt(s);
  };
  double out = 0.0;
  std::vector<Item> stack{{start, 1.0, 0.0, window_steps}};
  while (!stack.empty()) {
    Item item = stack.back();
    stack.pop_back();
    if (item.depth_left == 0 || tree.is_leaf(item.id)) {
      out += item.prob * item.peak;
      continue;
    }
    const Node& n = tree.node(item.id);
    const Kernel& k = menu.at(item.id).front();
    for (std::size_t c = 0; c < n.children.size(); ++c) {
      if (k.weights[c] == 0.0) continue;
      const NodeId child = n.children[c];
      stack.push_back(Item{child, item.prob * k.weights[c],
                           std::max(item.peak, distance(tree.node(child).state)),
                           item.depth_left - 1});
    }
  }
  return out;
}

}  // namespace detail

/// Exact tree-sum scaling table: for each step count, build the lattice and
/// take the worst window start of E[sup |X_{k+j} - X_k|] over windows of
/// `window_steps` steps, reported against sqrt(window length).
inline std::vector<ScalingRow> check_increment_scaling(const SdeSpec& spec,
                                                       const std::vector<int>& step_counts,
                                                       int window_steps = 1,
                                                       std::int64_t max_nodes =
                                                           defaults::node_cap) {
  std::vector<ScalingRow> rows;
  for (int steps : step_counts) {
    if (steps < 1) raise(ErrorCode::ValidationError, "step counts must be >= 1");
    SdeSpec local = spec;
    local.steps = steps;
    const Lattice lattice = build_lattice(local, max_nodes);
    const int w = std::min(window_steps, steps);
    const double dt = local.horizon / steps;
    Policy reference;
    reference.choice.assign(lattice.tree.nodes.size(), 0);
    const TreeMeasure measure = measure_of(lattice.tree, lattice.menu, reference);
    double worst = 0.0;
    for (int k = 0; k + w <= steps; ++k) {
      double expectation = 0.0;
      for (NodeId id : lattice.tree.nodes_at_depth(k)) {
        const double p = measure.node_prob[static_cast<std::size_t>(id)];
        if (p == 0.0) continue;
        expectation += p * detail::window_sup_expectation(lattice.tree, lattice.menu, id, w);
      }
      worst = std::max(worst, expectation);
    }
    ScalingRow row;
    row.steps = steps;
    row.delta = dt;
    row.window = w * dt;
    row.expected_sup = worst;
    row.ratio = worst / std::sqrt(row.window);
    rows.push_back(row);
  }
  return rows;
}

/// Numeric spot check of the drift's Lipschitz bound in the path variable:
/// max over sampled path pairs of |b(t,w,u) - b(t,w',u)| / ||w - w'||.
inline double lipschitz_probe(const SdeSpec& spec, std::uint64_t seed = 42,
                              int pairs = 1000) {
  validate_sde(spec);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  std::uniform_int_distribution<int> depth_draw(1, std::max(1, spec.steps));
  double worst = 0.0;
  for (int p = 0; p < pairs; ++p) {
    const int depth = depth_draw(rng);
    std::vector<std::vector<double>> path1, path2;
    for (int k = 0; k <= depth; ++k) {
      std::vector<double> a(static_cast<std::size_t>(spec.dimension)),
          b(static_cast<std::size_t>(spec.dimension));
      for (int i = 0; i < spec.dimension; ++i) {
        a[static_cast<std::size_t>(i)] = k == 0 ? 0.0 : coord(rng);
        b[static_cast<std::size_t>(i)] = k == 0 ? 0.0 : coord(rng);
      }
      path1.push_back(std::move(a));
      path2.push_back(std::move(b));
    }
    double sup_norm = 0.0;
    for (int k = 0; k <= depth; ++k) {
      double s = 0.0;
      for (int i = 0; i < spec.dimension; ++i) {
        const double d = path1[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] -
                         path2[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
        s += d * d;
      }
      sup_norm = std::max(sup_norm, std::sqrt(s));
    }
    if (sup_norm == 0.0) continue;
    for (double u : spec.controls) {
      const auto b1 = drift_eval(spec, depth, path1, u);
      const auto b2 = drift_eval(spec, depth, path2, u);
      double s = 0.0;
      for (std::size_t i = 0; i < b1.size(); ++i) {
        const double d = b1[i] - b2[i];
        s += d * d;
      }
      worst = std::max(worst, std::sqrt(s) / sup_norm);
    }
  }
  return worst;
}

inline void to_json(nlohmann::ordered_json& j, const SdeSpec& spec) {
  j = nlohmann::ordered_json::object();
  j["d"] = spec.dimension;
  j["T"] = spec.horizon;
  j["N"] = spec.steps;
  j["drift"] = {{"family", to_string(spec.drift)}, {"value", spec.drift_value}};
  j["controls"] = spec.controls;
  j["kappa"] = spec.kappa;
  j["singular"] = spec.singular;
  j["shocks"] = spec.shocks;
}

inline SdeSpec sde_from_json(const nlohmann::json& j) {
  SdeSpec spec;
  try {
    spec.dimension = j.value("d", 1);
    spec.horizon = j.at("T").get<double>();
    spec.steps = j.at("N").get<int>();
    if (j.contains("drift")) {
      const std::string family = j.at("drift").at("family").get<std::string>();
      if (family == "zero") spec.drift = DriftFamily::zero;
      else if (family == "constant") spec.drift = DriftFamily::constant;
      else if (family == "linear") spec.drift = DriftFamily::linear;
      else if (family == "running_max") spec.drift = DriftFamily::running_max;
      else raise(ErrorCode::ParseError, "generator.sde.drift.family: unknown '" + family + "'");
      spec.drift_value = j.at("drift").value("value", 0.0);
    }
    spec.controls = j.at("controls").get<std::vector<double>>();
    spec.kappa = j.at("kappa").get<double>();
    spec.singular = j.value("singular", true);
    if (j.contains("shocks")) spec.shocks = j.at("shocks").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, std::string("generator.sde block: ") + e.what());
  }
  validate_sde(spec);
  return spec;
}

}  // namespace rdg
