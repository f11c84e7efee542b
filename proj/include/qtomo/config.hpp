#pragma once

// Flat key = value run configuration. '#' starts a comment; unknown keys and
// malformed values are rejected before anything runs.
//
//   measurement = sic | mub
//   state       = rho1_pure | rho2_pure | mixed | misaligned | custom
//   bloch       = x, y, z            (custom only)
//   cos_theta   = 0.9996             (misaligned only)
//   lambda      = 0.0002             (depolarises the pure base state)
//   state_id    = label used in output rows (defaults to the state name)
//   protocols   = static, adaptive, known
//   n_min / n_max / n_points  or  n_grid = 100, 1000, ...
//   repetitions, seed, workers, output, format = csv | json
//   overlay = true | false, beta, gamma, adaptive_estimate = second | pooled

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qtomo/harness.hpp"
#include "qtomo/theory.hpp"

namespace qtomo {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class OutputFormat { Csv, Json };

struct RunConfig {
  SweepSpec sweep;
  std::string state_name = "rho1_pure";
  double lambda = 0.0;
  std::string output = "sweep.csv";
  OutputFormat format = OutputFormat::Csv;
  bool overlay = false;
  double beta = theory::kDefaultBeta;
  double gamma = theory::kDefaultGamma;

  void validate() const {
    try {
      sweep.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (sweep.n_grid.front() < 1) throw ConfigError("N must be positive");
    if (!(beta > 0.0) || !(gamma > 0.0)) throw ConfigError("beta and gamma must be positive");
    if (output.empty()) throw ConfigError("output path is empty");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is{std::string(s)};
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key + ": not a number: '" + v + "'");
  return out;
}

inline std::int64_t to_integer(const std::string& key, const std::string& v) {
  // Accepts plain integers and exact values written in scientific form (1e4).
  const double d = to_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 9.0e18) throw ConfigError(key + ": not an integer: '" + v + "'");
  return static_cast<std::int64_t>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

}  // namespace detail

/// Raw key/value pairs; duplicate or malformed lines are errors.
inline std::map<std::string, std::string> parse_key_values(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) throw ConfigError("duplicate key '" + key + "'");
  }
  return kv;
}

/// Builds a validated RunConfig. Overrides (from the command line) replace
/// file values key by key before interpretation.
inline RunConfig make_config(std::map<std::string, std::string> kv,
                             const std::map<std::string, std::string>& overrides = {}) {
  for (const auto& [k, v] : overrides) kv[k] = v;
  static const std::vector<std::string> known{
      "measurement", "state",    "bloch",       "cos_theta", "lambda", "state_id",
      "protocols",   "n_min",    "n_max",       "n_points",  "n_grid", "repetitions",
      "seed",        "workers",  "output",      "format",    "overlay", "beta",
      "gamma",       "adaptive_estimate"};
  for (const auto& [k, v] : kv) {
    bool ok = false;
    for (const auto& name : known) ok = ok || name == k;
    if (!ok) throw ConfigError("unknown key '" + k + "'");
  }
  auto get = [&kv](const std::string& k) -> std::optional<std::string> {
    const auto it = kv.find(k);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };

  RunConfig c;
  try {
    if (auto v = get("measurement")) c.sweep.measurement = parse_family(*v);
    if (auto v = get("lambda")) c.lambda = detail::to_double("lambda", *v);
    if (!(c.lambda >= 0.0 && c.lambda <= 0.5)) throw ConfigError("lambda must lie in [0, 1/2]");
    if (auto v = get("state")) c.state_name = *v;

    const bool custom = c.state_name == "custom";
    if (get("bloch") && !custom) throw ConfigError("bloch is only valid with state = custom");
    if (get("cos_theta") && c.state_name != "misaligned")
      throw ConfigError("cos_theta is only valid with state = misaligned");
    if (c.state_name == "rho1_pure") {
      c.sweep.state = depolarize(states::rho1_pure(), c.lambda);
    } else if (c.state_name == "rho2_pure") {
      c.sweep.state = depolarize(states::rho2_pure(), c.lambda);
    } else if (c.state_name == "mixed") {
      if (get("lambda")) throw ConfigError("lambda is not valid with state = mixed");
      c.sweep.state = states::mixed();
      c.lambda = 0.5;
    } else if (c.state_name == "misaligned") {
      const auto v = get("cos_theta");
      if (!v) throw ConfigError("state = misaligned needs cos_theta");
      const double ct = detail::to_double("cos_theta", *v);
      if (!(ct >= -1.0 && ct <= 1.0)) throw ConfigError("cos_theta must lie in [-1, 1]");
      c.sweep.state = states::misaligned(ct, c.lambda);
    } else if (custom) {
      const auto v = get("bloch");
      if (!v) throw ConfigError("state = custom needs bloch = x, y, z");
      if (get("lambda")) throw ConfigError("lambda is not valid with state = custom");
      const auto parts = detail::split_list(*v);
      if (parts.size() != 3) throw ConfigError("bloch needs three components");
      const BlochVector s{detail::to_double("bloch", parts[0]), detail::to_double("bloch", parts[1]),
                          detail::to_double("bloch", parts[2])};
      if (s.norm() > 1.0 + kPhysicalTol) throw ConfigError("bloch vector lies outside the ball");
      c.sweep.state = QubitState{project_to_ball(s)};
      c.lambda = 0.5 * (1.0 - c.sweep.state.length());
    } else {
      throw ConfigError("unknown state '" + c.state_name + "'");
    }
    c.sweep.state_id = get("state_id").value_or(c.state_name);

    c.sweep.protocols = {ProtocolKind::Static, ProtocolKind::Adaptive, ProtocolKind::KnownBasis};
    if (auto v = get("protocols")) {
      c.sweep.protocols.clear();
      for (const auto& p : detail::split_list(*v)) c.sweep.protocols.push_back(parse_protocol(p));
    }

    const bool range = get("n_min") || get("n_max") || get("n_points");
    if (range && get("n_grid")) throw ConfigError("give either n_grid or n_min/n_max/n_points");
    if (auto v = get("n_grid")) {
      for (const auto& p : detail::split_list(*v)) c.sweep.n_grid.push_back(detail::to_integer("n_grid", p));
    } else {
      const double lo = detail::to_double("n_min", get("n_min").value_or("100"));
      const double hi = detail::to_double("n_max", get("n_max").value_or("31623"));
      const auto points = detail::to_integer("n_points", get("n_points").value_or("12"));
      if (!(lo >= 1.0) || !(hi > lo)) throw ConfigError("need 1 <= n_min < n_max");
      if (points < 2) throw ConfigError("n_points must be at least 2");
      c.sweep.n_grid = log_grid(std::log10(lo), std::log10(hi), static_cast<int>(points));
    }

    if (auto v = get("repetitions")) {
      const auto r = detail::to_integer("repetitions", *v);
      if (r < 1 || r > 100000000) throw ConfigError("repetitions must be at least 1");
      c.sweep.repetitions = static_cast<int>(r);
    }
    if (auto v = get("seed")) {
      std::uint64_t seed = 0;
      const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), seed);
      if (ec != std::errc{} || p != v->data() + v->size()) throw ConfigError("seed: not an unsigned integer");
      c.sweep.seed = seed;
    }
    c.sweep.workers = default_workers();
    if (auto v = get("workers")) {
      const auto w = detail::to_integer("workers", *v);
      if (w < 1 || w > 4096) throw ConfigError("workers must lie in [1, 4096]");
      c.sweep.workers = static_cast<unsigned>(w);
    }
    if (auto v = get("output")) c.output = *v;
    if (auto v = get("format")) {
      if (*v == "csv") c.format = OutputFormat::Csv;
      else if (*v == "json") c.format = OutputFormat::Json;
      else throw ConfigError("format must be csv or json");
    }
    if (auto v = get("overlay")) c.overlay = detail::to_bool("overlay", *v);
    if (auto v = get("beta")) c.beta = detail::to_double("beta", *v);
    if (auto v = get("gamma")) c.gamma = detail::to_double("gamma", *v);
    if (auto v = get("adaptive_estimate")) c.sweep.adaptive_final = parse_adaptive_final(*v);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path,
                             const std::map<std::string, std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  return make_config(parse_key_values(in), overrides);
}

}  // namespace qtomo
