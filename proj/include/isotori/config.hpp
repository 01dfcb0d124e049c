#pragma once

// Run configuration for the command-line tool. The document is JSON:
//
//   {
//     "command": "continue",              check | floquet | nondeg | continue | freq
//     "system": "isotropic_momentum",     model name
//     "n": 3, "s": 2,                      optional, model defaults otherwise
//     "parameters": {"omega": 1, "nu": 1.4142135623730951},
//     "alpha": [1, 0],
//     "epsilon": 0.0,                      check/floquet/nondeg
//     "beta_grid": {"center": [..], "step": 0.02, "count": 3},
//     "eps_grid": [0, 0.025, 0.05],
//     "tolerances": {"tol_unit": 1e-6, "tol_int": 1e-8, "fixed_point": 1e-10,
//                    "ode_rel": 1e-10, "ode_abs": 1e-12,
//                    "monodromy_rel": 1e-14, "monodromy_abs": 1e-15,
//                    "hypothesis": 1e-9, "twist": 1e-6},
//     "outputs": "out",
//     "kappa": 1,                          1-based integral index for frequencies
//     "samples": {"enabled": true, "grid_per_cycle": 16},
//     "hypothesis": {"samples": 100, "radius": 0.1, "seed": 1},
//     "search": {"max_norm": 3}
//   }
//
// Every key except "command" and "system" is optional. Unknown keys, wrong
// types and out-of-range values are rejected with the offending key path.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isotori/error.hpp"
#include "isotori/models.hpp"
#include "isotori/numerics.hpp"

namespace isotori {

enum class Command { check, floquet, nondeg, continue_family, freq };

inline std::string_view to_string(Command c) {
  switch (c) {
    case Command::check: return "check";
    case Command::floquet: return "floquet";
    case Command::nondeg: return "nondeg";
    case Command::continue_family: return "continue";
    case Command::freq: return "freq";
  }
  return "unknown";
}

struct Tolerances {
  double tol_unit = 1e-6;
  double tol_int = 1e-8;
  double fixed_point = 1e-10;
  double ode_rel = 1e-10;
  double ode_abs = 1e-12;
  double monodromy_rel = 1e-14;
  double monodromy_abs = 1e-15;
  double hypothesis = 1e-9;
  double twist = 1e-6;

  bool operator==(const Tolerances&) const = default;
};

struct RunConfig {
  Command command = Command::check;
  ModelSpec system;  // normalized
  std::optional<std::vector<int>> alpha;
  double epsilon = 0.0;
  std::optional<std::vector<double>> beta_center;  // seed levels when absent
  std::vector<double> beta_step;
  std::vector<int> beta_count;
  std::vector<double> eps_grid{0.0};
  Tolerances tolerances;
  std::string outputs = "isotori_out";
  std::size_t kappa = 1;
  bool samples = true;
  std::size_t grid_per_cycle = 16;
  std::size_t hypothesis_samples = 100;
  double hypothesis_radius = 0.1;
  std::uint64_t seed = 1;
  int max_norm = 3;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void config_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::config, path + ": " + what);
}

inline void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<std::string_view> keys) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto k : keys) known = known || key == k;
    if (!known) config_error(prefix + key, "unknown key");
  }
}

inline const json& require_object(const json& v, const std::string& path) {
  if (!v.is_object()) config_error(path, "expected an object");
  return v;
}

inline double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) config_error(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) config_error(path, "must be finite");
  return x;
}

inline double get_positive(const json& v, const std::string& path) {
  const double x = get_number(v, path);
  if (!(x > 0.0)) config_error(path, "must be positive");
  return x;
}

inline long long get_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) config_error(path, "expected an integer");
  return v.get<long long>();
}

inline std::size_t get_count(const json& v, const std::string& path) {
  const long long x = get_integer(v, path);
  if (x <= 0) config_error(path, "must be a positive integer");
  return static_cast<std::size_t>(x);
}

inline std::vector<double> get_numbers(const json& v, const std::string& path) {
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(get_number(v, path));
  } else if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_number(v[i], path + "[" + std::to_string(i) + "]"));
  } else {
    config_error(path, "expected a number or an array of numbers");
  }
  return out;
}

/// A scalar is broadcast to `size` entries; an array must have exactly `size`.
template <class T, class Get>
std::vector<T> get_per_axis(const json& v, const std::string& path, std::size_t size, Get get) {
  if (!v.is_array()) return std::vector<T>(size, get(v, path));
  if (v.size() != size) config_error(path, "expected " + std::to_string(size) + " entries");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline Command parse_command(const json& v) {
  if (!v.is_string()) config_error("command", "expected a string");
  const auto name = v.get<std::string>();
  if (name == "check") return Command::check;
  if (name == "floquet") return Command::floquet;
  if (name == "nondeg") return Command::nondeg;
  if (name == "continue") return Command::continue_family;
  if (name == "freq") return Command::freq;
  config_error("command", "unknown command '" + name + "'");
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& doc) {
  using detail::config_error;
  detail::require_object(doc, "<root>");
  detail::reject_unknown(doc, "",
                         {"command", "system", "n", "s", "parameters", "alpha", "epsilon", "beta_grid", "eps_grid",
                          "tolerances", "outputs", "kappa", "samples", "hypothesis", "search"});
  RunConfig cfg;
  if (!doc.contains("command")) config_error("command", "missing required key");
  cfg.command = detail::parse_command(doc["command"]);

  if (!doc.contains("system")) config_error("system", "missing required key");
  if (!doc["system"].is_string()) config_error("system", "expected a model name");
  ModelSpec spec;
  try {
    spec.kind = parse_model_kind(doc["system"].get<std::string>());
  } catch (const Error& e) {
    config_error("system", e.what());
  }
  if (doc.contains("n")) spec.n = detail::get_count(doc["n"], "n");
  if (doc.contains("s")) spec.s = detail::get_count(doc["s"], "s");
  if (doc.contains("parameters")) {
    const auto& params = detail::require_object(doc["parameters"], "parameters");
    for (const auto& [key, value] : params.items()) {
      spec.parameters[key] = detail::get_numbers(value, "parameters." + key);
    }
  }
  try {
    cfg.system = normalized(spec);
  } catch (const Error& e) {
    config_error("system", e.what());
  }
  const std::size_t s = cfg.system.s;

  if (doc.contains("alpha")) {
    const auto& a = doc["alpha"];
    if (!a.is_array()) config_error("alpha", "expected an array of integers");
    if (a.size() != s) config_error("alpha", "expected " + std::to_string(s) + " entries");
    std::vector<int> alpha;
    bool nonzero = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      alpha.push_back(static_cast<int>(detail::get_integer(a[i], "alpha[" + std::to_string(i) + "]")));
      nonzero = nonzero || alpha.back() != 0;
    }
    if (!nonzero) config_error("alpha", "the homotopy class must be nonzero");
    cfg.alpha = alpha;
  }
  if (doc.contains("epsilon")) cfg.epsilon = detail::get_number(doc["epsilon"], "epsilon");

  cfg.beta_step.assign(s, 0.0);
  cfg.beta_count.assign(s, 1);
  if (doc.contains("beta_grid")) {
    const auto& g = detail::require_object(doc["beta_grid"], "beta_grid");
    detail::reject_unknown(g, "beta_grid.", {"center", "step", "count"});
    if (g.empty()) config_error("beta_grid", "grid is empty");
    if (g.contains("center")) {
      cfg.beta_center = detail::get_per_axis<double>(g["center"], "beta_grid.center", s, detail::get_number);
    }
    if (g.contains("step")) {
      cfg.beta_step = detail::get_per_axis<double>(g["step"], "beta_grid.step", s, detail::get_number);
    }
    if (g.contains("count")) {
      if (g["count"].is_array() && g["count"].empty()) config_error("beta_grid.count", "grid is empty");
      cfg.beta_count = detail::get_per_axis<int>(g["count"], "beta_grid.count", s, [](const auto& v, const auto& p) {
        const long long c = detail::get_integer(v, p);
        if (c <= 0) config_error(p, "grid is empty");
        return static_cast<int>(c);
      });
    }
  }
  if (doc.contains("eps_grid")) {
    const auto& e = doc["eps_grid"];
    if (!e.is_array()) config_error("eps_grid", "expected an array of numbers");
    if (e.empty()) config_error("eps_grid", "grid is empty");
    cfg.eps_grid = detail::get_numbers(e, "eps_grid");
  }

  if (doc.contains("tolerances")) {
    const auto& t = detail::require_object(doc["tolerances"], "tolerances");
    detail::reject_unknown(t, "tolerances.",
                           {"tol_unit", "tol_int", "fixed_point", "ode_rel", "ode_abs", "monodromy_rel",
                            "monodromy_abs", "hypothesis", "twist"});
    auto set = [&](const char* key, double& field) {
      if (t.contains(key)) field = detail::get_positive(t[key], std::string("tolerances.") + key);
    };
    set("tol_unit", cfg.tolerances.tol_unit);
    set("tol_int", cfg.tolerances.tol_int);
    set("fixed_point", cfg.tolerances.fixed_point);
    set("ode_rel", cfg.tolerances.ode_rel);
    set("ode_abs", cfg.tolerances.ode_abs);
    set("monodromy_rel", cfg.tolerances.monodromy_rel);
    set("monodromy_abs", cfg.tolerances.monodromy_abs);
    set("hypothesis", cfg.tolerances.hypothesis);
    set("twist", cfg.tolerances.twist);
  }
  if (doc.contains("outputs")) {
    if (!doc["outputs"].is_string() || doc["outputs"].get<std::string>().empty()) {
      config_error("outputs", "expected a directory path");
    }
    cfg.outputs = doc["outputs"].get<std::string>();
  }
  if (doc.contains("kappa")) {
    cfg.kappa = detail::get_count(doc["kappa"], "kappa");
    if (cfg.kappa > s) config_error("kappa", "must be between 1 and s = " + std::to_string(s));
  }
  if (doc.contains("samples")) {
    const auto& smp = detail::require_object(doc["samples"], "samples");
    detail::reject_unknown(smp, "samples.", {"enabled", "grid_per_cycle"});
    if (smp.contains("enabled")) {
      if (!smp["enabled"].is_boolean()) config_error("samples.enabled", "expected true or false");
      cfg.samples = smp["enabled"].get<bool>();
    }
    if (smp.contains("grid_per_cycle")) cfg.grid_per_cycle = detail::get_count(smp["grid_per_cycle"], "samples.grid_per_cycle");
  }
  if (doc.contains("hypothesis")) {
    const auto& h = detail::require_object(doc["hypothesis"], "hypothesis");
    detail::reject_unknown(h, "hypothesis.", {"samples", "radius", "seed"});
    if (h.contains("samples")) cfg.hypothesis_samples = detail::get_count(h["samples"], "hypothesis.samples");
    if (h.contains("radius")) cfg.hypothesis_radius = detail::get_positive(h["radius"], "hypothesis.radius");
    if (h.contains("seed")) {
      const long long seed = detail::get_integer(h["seed"], "hypothesis.seed");
      if (seed < 0) config_error("hypothesis.seed", "must be non-negative");
      cfg.seed = static_cast<std::uint64_t>(seed);
    }
  }
  if (doc.contains("search")) {
    const auto& sr = detail::require_object(doc["search"], "search");
    detail::reject_unknown(sr, "search.", {"max_norm"});
    if (sr.contains("max_norm")) cfg.max_norm = static_cast<int>(detail::get_count(sr["max_norm"], "search.max_norm"));
  }
  return cfg;
}

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::config, std::string("<document>: ") + e.what());
  }
  return parse_config(doc);
}

inline RunConfig parse_config(const char* text) { return parse_config(std::string(text)); }

/// Fully resolved configuration; parse_config(to_json(cfg)) == cfg.
inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json doc;
  doc["command"] = std::string(to_string(cfg.command));
  doc["system"] = std::string(to_string(cfg.system.kind));
  doc["n"] = cfg.system.n;
  doc["s"] = cfg.system.s;
  doc["parameters"] = nlohmann::json::object();
  for (const auto& [key, values] : cfg.system.parameters) doc["parameters"][key] = values;
  if (cfg.alpha) doc["alpha"] = *cfg.alpha;
  doc["epsilon"] = cfg.epsilon;
  doc["beta_grid"] = {{"step", cfg.beta_step}, {"count", cfg.beta_count}};
  if (cfg.beta_center) doc["beta_grid"]["center"] = *cfg.beta_center;
  doc["eps_grid"] = cfg.eps_grid;
  const auto& t = cfg.tolerances;
  doc["tolerances"] = {{"tol_unit", t.tol_unit},           {"tol_int", t.tol_int},
                       {"fixed_point", t.fixed_point},     {"ode_rel", t.ode_rel},
                       {"ode_abs", t.ode_abs},             {"monodromy_rel", t.monodromy_rel},
                       {"monodromy_abs", t.monodromy_abs}, {"hypothesis", t.hypothesis},
                       {"twist", t.twist}};
  doc["outputs"] = cfg.outputs;
  doc["kappa"] = cfg.kappa;
  doc["samples"] = {{"enabled", cfg.samples}, {"grid_per_cycle", cfg.grid_per_cycle}};
  doc["hypothesis"] = {{"samples", cfg.hypothesis_samples}, {"radius", cfg.hypothesis_radius}, {"seed", cfg.seed}};
  doc["search"] = {{"max_norm", cfg.max_norm}};
  return doc;
}

}  // namespace isotori
