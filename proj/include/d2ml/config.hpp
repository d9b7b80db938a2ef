#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "d2ml/error.hpp"
#include "d2ml/io.hpp"

namespace d2ml {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every recognised key with its default. Defaults follow the empirical
/// settings for detect and the simulation grid for simulate.
inline const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> keys = {
      {"input", "", "input CSV (detect, covnorms) or prior output directory (report)"},
      {"output", "out", "output directory"},
      {"estimator", "rigorous", "rigorous | adaptive"},
      {"ic", "bic", "adaptive LASSO criterion: aic | aicc | bic"},
      {"first_stage", "univariate", "adaptive weights from univariate or multivariate OLS"},
      {"hac_bandwidth", "2", "Bartlett bandwidth of the rigorous loadings"},
      {"c", "1.1", "rigorous plug-in constant"},
      {"gamma", "auto", "rigorous significance level; auto = 0.1/log(max(T,p))"},
      {"max_loading_iter", "15", "rigorous loading iterations"},
      {"loading_tol", "0.0001", "relative loading change that stops the iteration"},
      {"grid_size", "100", "adaptive lambda grid points"},
      {"grid_floor", "0.0001", "smallest grid lambda as a share of lambda_max"},
      {"cd_tol", "1e-07", "coordinate descent tolerance (max coefficient change)"},
      {"cd_max_sweeps", "10000", "coordinate descent sweep limit"},
      {"target_variable", "dp", "variable whose units are the regression targets"},
      {"observed_factors", "", "comma list of series labels added as observed factors"},
      {"unobserved_factors", "none", "none | csa | pca:k"},
      {"difference", "true", "take first differences before scaling"},
      {"scaling", "standardize", "standardize | demean | none"},
      {"restrict_most_connected", "true", "modified BM: keep the most connected half"},
      {"max_diag_share", "auto", "modified BM diagonal cap; auto = 0.5 for adaptive, none otherwise"},
      {"include_diagonal_in_norm", "true", "count the diagonal in the ratio-test norm"},
      {"norm", "l2", "column norm: l1 | l2 | linf"},
      {"workers", "1", "threads; results do not depend on it"},
      {"specs", "1", "simulate: comma list of specifications 1-5"},
      {"n", "50,100,150", "simulate: cross-section sizes"},
      {"t", "50,100,150", "simulate: sample lengths"},
      {"factors", "0", "simulate: numbers of common factors"},
      {"methods", "rigorous,adaptive,bm_baseline,oracle_ols", "simulate: methods"},
      {"ics", "bic", "simulate: criteria for the adaptive method"},
      {"reps", "100", "simulate: repetitions per cell"},
      {"seed", "12345", "simulate: base seed; repetition r uses seed + r"},
      {"dominant_share", "0.1", "simulate: N_d share for specification 5"},
      {"gaussian_centering_literal", "true", "simulate: apply (u - 2)/2 to the dominant noise"},
      {"sim_scaling", "demean", "simulate: scaling of generated panels"},
      {"burn_in", "50", "simulate: discarded start-up periods"},
      {"top", "20", "report: number of largest norms"},
  };
  return keys;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_schema()) values_[k.name] = k.default_value;
  }

  /// Flat `key = value` lines; `#` starts a comment. Unknown keys are errors.
  static RunConfig parse(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (io::trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("cli_app", "line " + std::to_string(lineno) + ": expected key = value");
      cfg.set(io::trim(line.substr(0, eq)), io::trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static RunConfig from_map(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    for (const auto& [k, v] : kv) cfg.set(k, v);
    return cfg;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ConfigError("cli_app", "unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// Every key, sorted, one per line. parse(to_text()) reproduces the config.
  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("cli_app", "unknown config key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const {
    const auto v = io::parse_double(str(key));
    if (!v) throw ConfigError("cli_app", key + ": '" + str(key) + "' is not a number");
    return *v;
  }

  std::optional<double> optional_real(const std::string& key, const std::string& unset) const {
    if (str(key) == unset) return std::nullopt;
    return real(key);
  }

  std::size_t count(const std::string& key) const { return parse_count(key, str(key)); }

  bool flag(const std::string& key) const {
    const std::string& v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("cli_app", key + ": '" + v + "' is not a boolean");
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& item : io::split(str(key), ','))
      if (auto t = io::trim(item); !t.empty()) out.push_back(t);
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& item : list(key)) out.push_back(parse_count(key, item));
    if (out.empty()) throw ConfigError("cli_app", key + ": empty list");
    return out;
  }

  bool operator==(const RunConfig&) const = default;

 private:
  static std::size_t parse_count(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("cli_app", key + ": '" + v + "' is not a non-negative integer");
    return static_cast<std::size_t>(std::stoull(v));
  }

  std::map<std::string, std::string> values_;
};

}  // namespace d2ml
