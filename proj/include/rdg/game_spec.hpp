#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rdg/ambiguity.hpp"
#include "rdg/errors.hpp"
#include "rdg/oracle.hpp"
#include "rdg/payoff.hpp"
#include "rdg/scenario_tree.hpp"
#include "rdg/sde_lattice.hpp"

namespace rdg {

enum class Mode { standard, triplet };

inline const char* to_string(Mode m) {
  return m == Mode::standard ? "standard" : "triplet";
}

struct Caps {
  std::int64_t max_nodes = defaults::node_cap;
  std::uint64_t max_policies = defaults::policy_cap;
  std::uint64_t max_stopping_rules = defaults::rule_cap;
  double max_triples = defaults::triple_cap;

  OracleCaps oracle() const { return OracleCaps{max_policies, max_stopping_rules, max_triples}; }
};

struct Tolerances {
  double oracle = defaults::oracle_tol;
  double submartingale = defaults::submartingale_tol;
  double region = defaults::region_tol;
  double weights = defaults::weight_tol;
  double payoff_bound = 1e-12;
};

/// Ambiguity block before it is bound to a tree: either one positional menu
/// template for every node of matching arity, or explicit per-node kernels
/// with weights keyed by child id.
struct MenuSpec {
  bool uniform = false;
  std::vector<Kernel> template_kernels;  // positional weights
  std::map<NodeId, std::vector<std::pair<double, std::map<NodeId, double>>>> explicit_menus;
};

/// Parsed game description: an explicit tree or an SDE generator, payoffs,
/// ambiguity, mode and the knobs. `realize` turns it into solvable data.
struct GameSpec {
  Mode mode = Mode::standard;
  std::optional<ScenarioTree> tree;
  std::optional<SdeSpec> sde;
  std::optional<PayoffSpec> payoff;
  std::optional<MenuSpec> ambiguity;
  Caps caps;
  Tolerances tolerances;
  double m0 = 1e6;
  std::string digest;
};

struct GameInstance {
  ScenarioTree tree;
  PayoffSpec payoff;
  KernelMenu menu;
  Mode mode = Mode::standard;
  Caps caps;
  Tolerances tolerances;
  double m0 = 1e6;
  std::string digest;
};

inline std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline GameSpec parse_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    raise(ErrorCode::ParseError, e.what());
  }
  GameSpec spec;
  spec.digest = fnv1a_hex(text);
  try {
    if (j.contains("mode")) {
      const std::string mode = j.at("mode").get<std::string>();
      if (mode == "standard") spec.mode = Mode::standard;
      else if (mode == "triplet") spec.mode = Mode::triplet;
      else raise(ErrorCode::ParseError, "mode: expected 'standard' or 'triplet'");
    }
    if (j.contains("tree") && j.contains("generator"))
      raise(ErrorCode::ValidationError, "spec must have exactly one of tree/generator, got both");
    if (j.contains("tree")) {
      spec.tree = tree_from_json(j.at("tree"));
    } else if (j.contains("generator")) {
      if (!j.at("generator").contains("sde"))
        raise(ErrorCode::ParseError, "generator: only the 'sde' generator is supported");
      spec.sde = sde_from_json(j.at("generator").at("sde"));
    } else {
      raise(ErrorCode::ValidationError, "spec must have exactly one of tree/generator, got none");
    }
    if (!j.contains("payoff")) raise(ErrorCode::ValidationError, "payoff block is required");
    spec.payoff = payoff_from_json(j.at("payoff"));
    if (j.contains("ambiguity")) {
      const auto& a = j.at("ambiguity");
      MenuSpec menus;
      if (a.contains("uniform") && a.contains("menus"))
        raise(ErrorCode::ValidationError, "ambiguity: give either 'uniform' or 'menus', not both");
      if (a.contains("uniform")) {
        menus.uniform = true;
        for (const auto& kj : a.at("uniform")) {
          Kernel k;
          k.label = kj.value("label", 0.0);
          k.weights = kj.at("weights").get<std::vector<double>>();
          menus.template_kernels.push_back(std::move(k));
        }
        if (menus.template_kernels.empty())
          raise(ErrorCode::ValidationError, "ambiguity.uniform: needs at least one kernel");
      } else if (a.contains("menus")) {
        for (auto it = a.at("menus").begin(); it != a.at("menus").end(); ++it) {
          const NodeId id = static_cast<NodeId>(std::stoll(it.key()));
          std::vector<std::pair<double, std::map<NodeId, double>>> kernels;
          for (const auto& kj : it.value()) {
            std::map<NodeId, double> weights;
            for (auto wt = kj.at("weights").begin(); wt != kj.at("weights").end(); ++wt)
              weights[static_cast<NodeId>(std::stoll(wt.key()))] = wt.value().get<double>();
            kernels.emplace_back(kj.value("label", 0.0), std::move(weights));
          }
          menus.explicit_menus[id] = std::move(kernels);
        }
      } else {
        raise(ErrorCode::ValidationError, "ambiguity: needs 'uniform' or 'menus'");
      }
      spec.ambiguity = std::move(menus);
    }
    if (spec.tree && !spec.ambiguity)
      raise(ErrorCode::ValidationError, "an explicit tree needs an ambiguity block");
    if (spec.sde && spec.ambiguity)
      raise(ErrorCode::ValidationError,
            "the sde generator supplies the menus; drop the ambiguity block");
    if (j.contains("caps")) {
      const auto& c = j.at("caps");
      spec.caps.max_nodes = c.value("max_nodes", spec.caps.max_nodes);
      spec.caps.max_policies = c.value("max_policies", spec.caps.max_policies);
      spec.caps.max_stopping_rules =
          c.value("max_stopping_rules", spec.caps.max_stopping_rules);
      spec.caps.max_triples = c.value("max_triples", spec.caps.max_triples);
    }
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      spec.tolerances.oracle = t.value("oracle", spec.tolerances.oracle);
      spec.tolerances.submartingale = t.value("submartingale", spec.tolerances.submartingale);
      spec.tolerances.region = t.value("region", spec.tolerances.region);
      spec.tolerances.weights = t.value("weights", spec.tolerances.weights);
      spec.tolerances.payoff_bound = t.value("payoff_bound", spec.tolerances.payoff_bound);
    }
    spec.m0 = j.value("m0", spec.m0);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::ParseError, e.what());
  } catch (const std::invalid_argument&) {
    raise(ErrorCode::ParseError, "node-id keys must be integers");
  }
  return spec;
}

namespace detail {

inline KernelMenu bind_menus(const ScenarioTree& tree, const MenuSpec& menus) {
  KernelMenu menu;
  menu.by_node.assign(tree.nodes.size(), {});
  for (const Node& n : tree.nodes) {
    if (tree.is_leaf(n.id)) continue;
    auto& kernels = menu.by_node[static_cast<std::size_t>(n.id)];
    if (menus.uniform) {
      for (const Kernel& k : menus.template_kernels) {
        if (k.weights.size() != n.children.size())
          raise(ErrorCode::ValidationError,
                "ambiguity.uniform: template arity " + std::to_string(k.weights.size()) +
                    " does not match the " + std::to_string(n.children.size()) +
                    " children of node " + std::to_string(n.id));
        kernels.push_back(k);
      }
      continue;
    }
    const auto it = menus.explicit_menus.find(n.id);
    if (it == menus.explicit_menus.end())
      raise(ErrorCode::ValidationError,
            "ambiguity.menus: no menu for non-leaf node " + std::to_string(n.id));
    for (const auto& [label, weights] : it->second) {
      Kernel k;
      k.label = label;
      k.weights.assign(n.children.size(), 0.0);
      for (const auto& [child, w] : weights) {
        const auto pos = std::find(n.children.begin(), n.children.end(), child);
        if (pos == n.children.end())
          raise(ErrorCode::ValidationError,
                "ambiguity.menus: node " + std::to_string(child) +
                    " is not a child of node " + std::to_string(n.id));
        k.weights[static_cast<std::size_t>(pos - n.children.begin())] = w;
      }
      kernels.push_back(std::move(k));
    }
  }
  return menu;
}

}  // namespace detail

inline GameInstance realize(const GameSpec& spec) {
  GameInstance instance;
  instance.mode = spec.mode;
  instance.caps = spec.caps;
  instance.tolerances = spec.tolerances;
  instance.m0 = spec.m0;
  instance.digest = spec.digest;
  if (!spec.payoff) raise(ErrorCode::ValidationError, "payoff block is required");
  instance.payoff = *spec.payoff;
  if (spec.tree) {
    instance.tree = *spec.tree;
    if (instance.tree.node_count() > spec.caps.max_nodes)
      raise(ErrorCode::SizeLimit, "tree exceeds the node cap");
    if (!spec.ambiguity)
      raise(ErrorCode::ValidationError, "an explicit tree needs an ambiguity block");
    instance.menu = detail::bind_menus(instance.tree, *spec.ambiguity);
  } else if (spec.sde) {
    Lattice lattice = build_lattice(*spec.sde, spec.caps.max_nodes);
    instance.tree = std::move(lattice.tree);
    instance.menu = std::move(lattice.menu);
  } else {
    raise(ErrorCode::ValidationError, "spec must have exactly one of tree/generator");
  }
  validate_menu(instance.tree, instance.menu, instance.tolerances.weights);
  validate_payoff(instance.payoff, instance.tree, instance.mode == Mode::triplet, instance.m0);
  return instance;
}

inline GameSpec load_spec_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) raise(ErrorCode::ParseError, "cannot open spec file '" + path + "'");
  std::string text;
  char buf[1 << 14];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, got);
  std::fclose(f);
  return parse_spec(text);
}

inline void to_json(nlohmann::ordered_json& j, const GameSpec& spec) {
  j = nlohmann::ordered_json::object();
  j["mode"] = to_string(spec.mode);
  if (spec.tree) {
    nlohmann::ordered_json tj;
    to_json(tj, *spec.tree);
    j["tree"] = std::move(tj);
  }
  if (spec.sde) {
    nlohmann::ordered_json sj;
    to_json(sj, *spec.sde);
    j["generator"] = {{"sde", std::move(sj)}};
  }
  if (spec.payoff) {
    nlohmann::ordered_json pj;
    to_json(pj, *spec.payoff);
    j["payoff"] = std::move(pj);
  }
  if (spec.ambiguity) {
    nlohmann::ordered_json aj = nlohmann::ordered_json::object();
    if (spec.ambiguity->uniform) {
      auto arr = nlohmann::ordered_json::array();
      for (const Kernel& k : spec.ambiguity->template_kernels)
        arr.push_back({{"label", k.label}, {"weights", k.weights}});
      aj["uniform"] = std::move(arr);
    } else {
      nlohmann::ordered_json menus = nlohmann::ordered_json::object();
      for (const auto& [id, kernels] : spec.ambiguity->explicit_menus) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& [label, weights] : kernels) {
          nlohmann::ordered_json wj = nlohmann::ordered_json::object();
          for (const auto& [child, w] : weights) wj[std::to_string(child)] = w;
          arr.push_back({{"label", label}, {"weights", std::move(wj)}});
        }
        menus[std::to_string(id)] = std::move(arr);
      }
      aj["menus"] = std::move(menus);
    }
    j["ambiguity"] = std::move(aj);
  }
}

}  // namespace rdg
