#pragma once

#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "trfe/errors.hpp"
#include "trfe/systems.hpp"

namespace trfe {

/// Config rejected: parse failure, unknown keys, or range violations.
/// All problems are collected before throwing.
struct ConfigError : Error {
  std::vector<std::string> problems;
  explicit ConfigError(std::vector<std::string> p)
      : Error(join(p)), problems(std::move(p)) {}

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = "invalid config:";
    for (const auto& e : p) s += "\n  - " + e;
    return s;
  }
};

struct BetaGridSpec {
  double min = 1e-3;
  double max = 1e3;
  int count = 60;
};

struct SystemSpec {
  std::string name = "dubins";
  // dubins
  DubinsParams dubins;
  // scalar_lqg
  double a = 1.0, b = 1.0, q = 1.0, r = 1.0;
  double sigma_w = 0.1, x0_var = 1.0;
  int horizon = 20;
};

struct ExperimentConfig {
  SystemSpec system;
  long samples = 50000;
  BetaGridSpec beta_grid;
  int n_alpha = 256;
  std::vector<double> sigma_v_sweep{0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0};
  double epsilon = 0.0;  // 0: 1e-4 * max(J_ol, 1)
  std::uint64_t seed = 20240817;
  bool certify = true;
  int n_eval = 2000;
  bool desk_scale = false;

  /// Shrinks the Monte Carlo budgets for quick runs.
  void apply_desk_scale() {
    desk_scale = true;
    samples = std::min<long>(samples, 5000);
    n_eval = std::min(n_eval, 500);
  }
};

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void line_col(const std::string& text, std::size_t byte, int* line,
                     int* col) {
  *line = 1;
  *col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++*line;
      *col = 1;
    } else {
      ++*col;
    }
  }
}

}  // namespace detail

/// Canonical resolved form; sorted keys make the dump (and hash) stable.
inline nlohmann::json resolved_config(const ExperimentConfig& c) {
  nlohmann::json j;
  j["system"]["name"] = c.system.name;
  if (c.system.name == "dubins") {
    j["system"]["speed"] = c.system.dubins.speed;
    j["system"]["dt"] = c.system.dubins.dt;
    j["system"]["horizon"] = c.system.dubins.horizon;
    j["system"]["sigma_w"] = c.system.dubins.sigma_w;
    j["system"]["heading_weight"] = c.system.dubins.heading_weight;
    j["system"]["control_weight"] = c.system.dubins.control_weight;
  } else {
    j["system"]["a"] = c.system.a;
    j["system"]["b"] = c.system.b;
    j["system"]["q"] = c.system.q;
    j["system"]["r"] = c.system.r;
    j["system"]["sigma_w"] = c.system.sigma_w;
    j["system"]["x0_var"] = c.system.x0_var;
    j["system"]["horizon"] = c.system.horizon;
  }
  j["samples"] = c.samples;
  j["beta_grid"]["min"] = c.beta_grid.min;
  j["beta_grid"]["max"] = c.beta_grid.max;
  j["beta_grid"]["count"] = c.beta_grid.count;
  j["n_alpha"] = c.n_alpha;
  j["sigma_v_sweep"] = c.sigma_v_sweep;
  j["epsilon"] = c.epsilon;
  j["seed"] = c.seed;
  j["certify"] = c.certify;
  j["n_eval"] = c.n_eval;
  j["desk_scale"] = c.desk_scale;
  return j;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(resolved_config(c).dump())));
  return buf;
}

/// Parses and validates a JSON config document. Duplicate keys are parse
/// errors; unknown keys and range violations are all reported at once.
/// An empty document resolves to the paper's Dubins configuration.
inline ExperimentConfig validate_config(const std::string& raw) {
  using nlohmann::json;
  std::vector<std::string> problems;

  std::vector<std::set<std::string>> key_stack;
  std::string duplicate;
  json::parser_callback_t cb = [&](int, json::parse_event_t event,
                                   json& parsed) -> bool {
    if (event == json::parse_event_t::object_start) {
      key_stack.emplace_back();
    } else if (event == json::parse_event_t::object_end) {
      key_stack.pop_back();
    } else if (event == json::parse_event_t::key) {
      const std::string key = parsed.get<std::string>();
      if (!key_stack.back().insert(key).second && duplicate.empty())
        duplicate = key;
    }
    return true;
  };

  const std::string text = raw.empty() ? "{}" : raw;
  json doc;
  try {
    doc = json::parse(text, cb);
  } catch (const json::parse_error& e) {
    int line = 0, col = 0;
    detail::line_col(text, e.byte, &line, &col);
    throw ConfigError({"parse error at line " + std::to_string(line) +
                       ", column " + std::to_string(col) + ": " + e.what()});
  }
  if (!duplicate.empty())
    throw ConfigError({"parse error: duplicate key \"" + duplicate + "\""});
  if (!doc.is_object()) throw ConfigError({"top level must be an object"});

  auto check_keys = [&](const json& obj, const std::set<std::string>& allowed,
                        const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.count(it.key()))
        problems.push_back("unknown key \"" + it.key() + "\" in " + where);
  };

  ExperimentConfig c;
  check_keys(doc, {"system", "samples", "beta_grid", "n_alpha",
                   "sigma_v_sweep", "epsilon", "seed", "certify", "n_eval"},
             "config root");

  auto number = [&](const json& obj, const char* key, double dflt,
                    bool positive, const std::string& where) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_number()) {
      problems.push_back(where + "." + key + " must be a number");
      return dflt;
    }
    const double v = obj[key].get<double>();
    if (positive && !(v > 0.0))
      problems.push_back(where + "." + key + " must be positive (got " +
                         detail::fmt_double(v) + ")");
    return v;
  };
  auto integer = [&](const json& obj, const char* key, long dflt,
                     const std::string& where) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_number_integer()) {
      problems.push_back(where + "." + key + " must be an integer");
      return dflt;
    }
    const long v = obj[key].get<long>();
    if (v <= 0)
      problems.push_back(where + "." + key + " must be positive (got " +
                         std::to_string(v) + ")");
    return v;
  };

  if (doc.contains("system")) {
    const json& s = doc["system"];
    if (!s.is_object()) {
      problems.push_back("system must be an object");
    } else {
      c.system.name = s.value("name", std::string("dubins"));
      if (c.system.name == "dubins") {
        check_keys(s, {"name", "speed", "dt", "horizon", "sigma_w",
                       "heading_weight", "control_weight"},
                   "system");
        c.system.dubins.speed = number(s, "speed", 1.0, true, "system");
        c.system.dubins.dt = number(s, "dt", 0.1, true, "system");
        c.system.dubins.horizon =
            static_cast<int>(integer(s, "horizon", 100, "system"));
        c.system.dubins.sigma_w = number(s, "sigma_w", 0.1, true, "system");
        c.system.dubins.heading_weight =
            number(s, "heading_weight", 0.1, true, "system");
        c.system.dubins.control_weight =
            number(s, "control_weight", 0.5, true, "system");
      } else if (c.system.name == "scalar_lqg") {
        check_keys(s, {"name", "a", "b", "q", "r", "sigma_w", "x0_var",
                       "horizon"},
                   "system");
        c.system.a = number(s, "a", 1.0, false, "system");
        c.system.b = number(s, "b", 1.0, false, "system");
        c.system.q = number(s, "q", 1.0, true, "system");
        c.system.r = number(s, "r", 1.0, true, "system");
        c.system.sigma_w = number(s, "sigma_w", 0.1, true, "system");
        c.system.x0_var = number(s, "x0_var", 1.0, false, "system");
        c.system.horizon = static_cast<int>(integer(s, "horizon", 20, "system"));
      } else {
        problems.push_back("unknown system name \"" + c.system.name + "\"");
      }
    }
  }

  c.samples = integer(doc, "samples", c.samples, "config");
  c.n_alpha = static_cast<int>(integer(doc, "n_alpha", c.n_alpha, "config"));
  c.n_eval = static_cast<int>(integer(doc, "n_eval", c.n_eval, "config"));
  if (doc.contains("beta_grid")) {
    const json& b = doc["beta_grid"];
    if (!b.is_object()) {
      problems.push_back("beta_grid must be an object");
    } else {
      check_keys(b, {"min", "max", "count"}, "beta_grid");
      c.beta_grid.min = number(b, "min", c.beta_grid.min, true, "beta_grid");
      c.beta_grid.max = number(b, "max", c.beta_grid.max, true, "beta_grid");
      c.beta_grid.count =
          static_cast<int>(integer(b, "count", c.beta_grid.count, "beta_grid"));
      if (c.beta_grid.max <= c.beta_grid.min)
        problems.push_back("beta_grid.max must exceed beta_grid.min");
    }
  }
  if (doc.contains("sigma_v_sweep")) {
    const json& sw = doc["sigma_v_sweep"];
    if (!sw.is_array() || sw.empty()) {
      problems.push_back("sigma_v_sweep must be a nonempty array");
    } else {
      c.sigma_v_sweep.clear();
      for (std::size_t i = 0; i < sw.size(); ++i) {
        if (!sw[i].is_number() || !(sw[i].get<double>() > 0.0)) {
          problems.push_back("sigma_v_sweep[" + std::to_string(i) +
                             "] must be a positive number");
          continue;
        }
        c.sigma_v_sweep.push_back(sw[i].get<double>());
      }
    }
  }
  if (doc.contains("epsilon")) {
    if (!doc["epsilon"].is_number() || doc["epsilon"].get<double>() < 0.0)
      problems.push_back("epsilon must be a nonnegative number");
    else
      c.epsilon = doc["epsilon"].get<double>();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer())
      problems.push_back("seed must be an integer");
    else
      c.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("certify")) {
    if (!doc["certify"].is_boolean())
      problems.push_back("certify must be a boolean");
    else
      c.certify = doc["certify"].get<bool>();
  }

  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

}  // namespace trfe
