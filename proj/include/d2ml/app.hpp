#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "d2ml/config.hpp"
#include "d2ml/dds.hpp"
#include "d2ml/error.hpp"
#include "d2ml/io.hpp"
#include "d2ml/lasso.hpp"
#include "d2ml/nss.hpp"
#include "d2ml/panel.hpp"
#include "d2ml/simulation.hpp"

#ifndef D2ML_VERSION
#define D2ML_VERSION "0.0.0"
#endif

namespace d2ml::app {

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numerical: return 4;
  }
  return 1;
}

/// Files produced by one command, written together with manifest.json.
struct Bundle {
  std::string command;
  std::string dir;
  std::vector<std::pair<std::string, std::string>> files;
  nlohmann::json manifest;

  void add(const std::string& name, std::string content) { files.emplace_back(name, std::move(content)); }

  const std::string& file(const std::string& name) const {
    for (const auto& [n, c] : files)
      if (n == name) return c;
    throw ConfigError("cli_app", "bundle has no file '" + name + "'");
  }

  void write() {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cli_app", "cannot create output directory '" + dir + "': " + ec.message());
    nlohmann::json outputs = nlohmann::json::object();
    for (const auto& [name, content] : files) {
      io::write_file((std::filesystem::path(dir) / name).string(), content);
      outputs[name] = io::fnv1a64(content);
    }
    manifest["outputs"] = outputs;
    io::write_file((std::filesystem::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  }
};

inline nlohmann::json base_manifest(const std::string& command, const RunConfig& cfg) {
  nlohmann::json m;
  m["tool"] = "d2ml";
  m["version"] = D2ML_VERSION;
  m["command"] = command;
  m["config"] = cfg.values();
  return m;
}

/// Config stored in a manifest. The recorded input fingerprint must still
/// match, otherwise the rerun would not reproduce the outputs.
inline RunConfig config_from_manifest(const std::string& path) {
  const std::string text = io::read_file(path);
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cli_app", "manifest '" + path + "' is not valid JSON: " + e.what());
  }
  if (!m.contains("config") || !m["config"].is_object())
    throw ConfigError("cli_app", "manifest '" + path + "' has no config block");
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : m["config"].items()) {
    if (!v.is_string()) throw ConfigError("cli_app", "manifest config value for '" + k + "' is not a string");
    kv[k] = v.get<std::string>();
  }
  RunConfig cfg = RunConfig::from_map(kv);
  if (m.contains("input") && m["input"].contains("fnv1a64")) {
    const std::string input = cfg.str("input");
    const std::string now = io::fnv1a64(io::read_file(input));
    if (now != m["input"]["fnv1a64"].get<std::string>())
      throw DataError("cli_app", "input '" + input + "' changed since the manifest was written");
  }
  return cfg;
}

inline std::string command_from_manifest(const std::string& path) {
  const nlohmann::json m = nlohmann::json::parse(io::read_file(path), nullptr, false);
  if (m.is_discarded() || !m.contains("command")) throw ConfigError("cli_app", "manifest '" + path + "' has no command");
  return m["command"].get<std::string>();
}

inline PenaltyConfig penalty_from(const RunConfig& cfg) {
  PenaltyConfig p;
  p.kind = parse_penalty_kind(cfg.str("estimator"));
  p.c = cfg.real("c");
  p.gamma = cfg.optional_real("gamma", "auto");
  p.hac_bandwidth = static_cast<int>(cfg.count("hac_bandwidth"));
  p.max_loading_iter = static_cast<int>(cfg.count("max_loading_iter"));
  p.loading_tol = cfg.real("loading_tol");
  p.ic = parse_ic(cfg.str("ic"));
  p.grid_size = cfg.count("grid_size");
  p.grid_floor = cfg.real("grid_floor");
  p.first_stage = parse_first_stage(cfg.str("first_stage"));
  p.cd_tol = cfg.real("cd_tol");
  p.cd_max_sweeps = static_cast<int>(cfg.count("cd_max_sweeps"));
  p.validate();
  return p;
}

inline SelectOptions select_from(const RunConfig& cfg, PenaltyKind kind) {
  SelectOptions o;
  o.restrict_most_connected = cfg.flag("restrict_most_connected");
  const std::string& share = cfg.str("max_diag_share");
  if (share == "auto") {
    if (kind == PenaltyKind::adaptive) o.max_diag_share = 0.5;
  } else if (share != "none") {
    o.max_diag_share = cfg.real("max_diag_share");
    if (!(*o.max_diag_share > 0.0 && *o.max_diag_share <= 1.0))
      throw ConfigError("cli_app", "max_diag_share must lie in (0, 1]");
  }
  o.include_diagonal_in_norm = cfg.flag("include_diagonal_in_norm");
  o.norm = parse_norm_kind(cfg.str("norm"));
  return o;
}

inline nlohmann::json to_json(const FilterRecord& f) {
  return {{"restrict_most_connected", f.restrict_most_connected},
          {"connection_cutoff", f.connection_cutoff},
          {"after_connection_filter", f.after_connection_filter},
          {"max_diag_share", f.max_diag_share ? nlohmann::json(*f.max_diag_share) : nlohmann::json(nullptr)},
          {"dropped_by_diag_share", f.dropped_by_diag_share},
          {"eligible", f.eligible}};
}

inline std::vector<std::string> labels(const std::vector<SeriesId>& ids) {
  std::vector<std::string> out;
  for (const auto& id : ids) out.push_back(id.label());
  return out;
}

struct FactorMode {
  enum Kind { none, csa, pca } kind = none;
  std::size_t k = 0;
};

inline FactorMode parse_factor_mode(const std::string& s) {
  if (s == "none") return {};
  if (s == "csa") return {FactorMode::csa, 0};
  if (s.rfind("pca:", 0) == 0) {
    const std::string n = s.substr(4);
    if (!n.empty() && n.find_first_not_of("0123456789") == std::string::npos && std::stoul(n) > 0)
      return {FactorMode::pca, std::stoul(n)};
  }
  throw ConfigError("cli_app", "unobserved_factors must be none, csa or pca:k (got '" + s + "')");
}

/// Checks the preprocessing keys so bad values fail before any data is read.
inline void check_preprocessing(const RunConfig& cfg) {
  cfg.flag("difference");
  parse_panel_scaling(cfg.str("scaling"));
}

inline Panel preprocess(Panel p, const RunConfig& cfg) {
  if (cfg.flag("difference")) p = first_difference(p);
  switch (parse_panel_scaling(cfg.str("scaling"))) {
    case PanelScaling::standardize: p = standardize(p); break;
    case PanelScaling::demean: p = demean(p); break;
    case PanelScaling::none: break;
  }
  return p;
}

struct LoadedInput {
  Panel panel;
  nlohmann::json fingerprint;
};

inline LoadedInput load_input(const RunConfig& cfg) {
  const std::string& path = cfg.str("input");
  if (path.empty()) throw ConfigError("cli_app", "input is required");
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("cli_app", "input '" + path + "' is not a file");
  const std::string text = io::read_file(path);
  return {parse_panel_csv(text), {{"path", path}, {"bytes", text.size()}, {"fnv1a64", io::fnv1a64(text)}}};
}

inline nlohmann::json edges_json(const std::vector<Edge>& edges) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : edges)
    arr.push_back({{"from", e.from_id.label()},
                   {"to", e.to_id.label()},
                   {"weight", e.weight},
                   {"dominant_origin", e.dominant_origin}});
  return arr;
}

/// Node-wise detection on a panel: targets are the units of target_variable.
inline Bundle cmd_detect(const RunConfig& cfg) {
  Bundle b{"detect", cfg.str("output"), {}, base_manifest("detect", cfg)};
  const PenaltyConfig penalty = penalty_from(cfg);
  const SelectOptions select = select_from(cfg, penalty.kind);
  const FactorMode mode = parse_factor_mode(cfg.str("unobserved_factors"));
  const std::string target = cfg.str("target_variable");
  const unsigned workers = static_cast<unsigned>(std::max<std::size_t>(1, cfg.count("workers")));
  check_preprocessing(cfg);

  LoadedInput in = load_input(cfg);
  const Panel& raw = in.panel;
  std::vector<std::size_t> factor_cols;
  for (const auto& name : cfg.list("observed_factors")) {
    const auto j = raw.find(name);
    if (!j) throw ConfigError("cli_app", "observed factor '" + name + "' not found in input");
    if (std::find(factor_cols.begin(), factor_cols.end(), *j) != factor_cols.end())
      throw ConfigError("cli_app", "observed factor '" + name + "' listed twice");
    factor_cols.push_back(*j);
  }
  const std::set<std::size_t> factor_set(factor_cols.begin(), factor_cols.end());
  std::vector<std::size_t> targets, others;
  std::vector<std::string> dropped;
  std::set<std::string> variables;
  for (std::size_t j = 0; j < raw.series(); ++j) {
    const SeriesId& id = raw.ids()[j];
    if (factor_set.count(j)) continue;
    if (id.is_global()) {
      dropped.push_back(id.label());
      continue;
    }
    variables.insert(id.variable);
    (id.variable == target ? targets : others).push_back(j);
  }
  if (targets.empty()) throw ConfigError("cli_app", "no series with target variable '" + target + "'");
  if (targets.size() < 2) throw DataError("cli_app", "target variable '" + target + "' has a single unit");

  std::vector<std::size_t> order = targets;
  order.insert(order.end(), others.begin(), others.end());
  order.insert(order.end(), factor_cols.begin(), factor_cols.end());
  Panel p = preprocess(select_series(raw, order), cfg);
  if (mode.kind == FactorMode::csa) p = cross_section_averages(p);
  if (mode.kind == FactorMode::pca) {
    const std::size_t base = targets.size() + others.size();
    if (mode.k >= std::min(p.periods(), base))
      throw ConfigError("cli_app", "pca:" + std::to_string(mode.k) + " needs k < min(T, M)");
    p = append_principal_components(p, mode.k);
  }

  const std::size_t n_units = targets.size();
  const std::size_t n_global = p.series() - targets.size() - others.size();
  const std::size_t k_vars = variables.size();
  const bool balanced = n_units * k_vars + n_global == p.series();
  std::vector<std::size_t> target_rows(n_units);
  for (std::size_t i = 0; i < n_units; ++i) target_rows[i] = i;

  const BetaMatrix beta = nodewise_select(p, penalty, target_rows, workers);
  const ConcentrationMatrix k = balanced ? build_constrained_concentration(beta, n_units, k_vars, n_global)
                                         : build_target_concentration(beta, n_units);
  const DominanceResult dr = select_dominant(k, select);
  const std::vector<Edge> edges = edge_list(k, dr.dominant);

  b.add("norms.csv", norms_csv(k, dr));
  b.add("edges.json", edges_json(edges).dump(2) + "\n");
  b.add("graph.dot", to_dot(dr.dominant_ids, edges));
  b.add("kappa.csv", to_csv(k));
  b.add("beta.csv", to_csv(beta));

  std::vector<std::string> regressors;
  for (std::size_t j = n_units + others.size(); j < p.series(); ++j) regressors.push_back(p.ids()[j].label());
  std::vector<std::string> capped, degenerate;
  for (std::size_t i = 0; i < n_units; ++i)
    if (beta.capped_rows[i]) capped.push_back(p.ids()[i].label());
  auto& m = b.manifest;
  m["input"] = in.fingerprint;
  m["preprocessing"] = p.preprocessing_log();
  m["series"] = labels(p.ids());
  m["regressors"] = regressors;
  m["dropped_series"] = dropped;
  m["block"] = {{"n_units", n_units}, {"k_vars", k_vars}, {"n_global", n_global}, {"balanced", balanced}};
  m["penalty"] = {{"estimator", to_string(penalty.kind)}, {"ic", to_string(penalty.ic)},
                  {"hac_bandwidth", penalty.hac_bandwidth}};
  m["filters"] = to_json(dr.filters);
  m["capped_rows"] = capped;
  m["n_dominant"] = dr.n_dominant;
  m["dominant"] = labels(dr.dominant_ids);
  return b;
}

/// Ratio criterion on the inverse sample covariance of a single-variable panel.
inline Bundle cmd_covnorms(const RunConfig& cfg) {
  Bundle b{"covnorms", cfg.str("output"), {}, base_manifest("covnorms", cfg)};
  SelectOptions select;
  select.include_diagonal_in_norm = cfg.flag("include_diagonal_in_norm");
  select.norm = parse_norm_kind(cfg.str("norm"));
  check_preprocessing(cfg);

  LoadedInput in = load_input(cfg);
  std::vector<std::size_t> cols;
  std::set<std::string> variables;
  for (std::size_t j = 0; j < in.panel.series(); ++j)
    if (!in.panel.ids()[j].is_global()) {
      cols.push_back(j);
      variables.insert(in.panel.ids()[j].variable);
    }
  if (variables.size() != 1)
    throw DataError("cli_app", "covnorms expects a single-variable panel, found " +
                                   std::to_string(variables.size()) + " variables");
  const Panel p = preprocess(select_series(in.panel, cols), cfg);
  const ConcentrationMatrix k = sample_concentration(p);
  const DominanceResult dr = select_dominant(k, select);

  b.add("norms.csv", norms_csv(k, dr));
  b.add("kappa.csv", to_csv(k));
  b.add("graph.dot", to_dot(dr.dominant_ids, edge_list(k, dr.dominant)));
  auto& m = b.manifest;
  m["input"] = in.fingerprint;
  m["preprocessing"] = p.preprocessing_log();
  m["series"] = labels(p.ids());
  m["n_dominant"] = dr.n_dominant;
  m["dominant"] = labels(dr.dominant_ids);
  return b;
}

inline std::vector<MethodConfig> simulation_methods(const RunConfig& cfg) {
  std::vector<MethodConfig> out;
  const PenaltyConfig knobs = penalty_from(cfg);
  for (const auto& name : cfg.list("methods")) {
    const MethodKind kind = parse_method(name);
    std::vector<InformationCriterion> ics = {InformationCriterion::bic};
    if (kind == MethodKind::adaptive) {
      ics.clear();
      for (const auto& ic : cfg.list("ics")) ics.push_back(parse_ic(ic));
      if (ics.empty()) throw ConfigError("cli_app", "ics: empty list");
    }
    for (auto ic : ics) {
      MethodConfig m = MethodConfig::defaults(kind, ic);
      const PenaltyKind pk = m.penalty.kind;
      m.penalty = knobs;
      m.penalty.kind = pk;
      m.penalty.ic = ic;
      out.push_back(m);
    }
  }
  if (out.empty()) throw ConfigError("cli_app", "methods: empty list");
  return out;
}

/// Monte Carlo grid: specs x n x t x factors x methods, one row each in
/// nss.csv and dds.csv.
inline Bundle cmd_simulate(const RunConfig& cfg) {
  Bundle b{"simulate", cfg.str("output"), {}, base_manifest("simulate", cfg)};
  const std::vector<MethodConfig> methods = simulation_methods(cfg);
  const std::size_t reps = cfg.count("reps");
  const unsigned workers = static_cast<unsigned>(std::max<std::size_t>(1, cfg.count("workers")));
  const std::string seed_text = cfg.str("seed");
  if (seed_text.empty() || seed_text.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("cli_app", "seed: '" + seed_text + "' is not a non-negative integer");
  const std::uint64_t seed = std::stoull(seed_text);
  const PanelScaling scaling = parse_panel_scaling(cfg.str("sim_scaling"));

  std::vector<SimSpec> grid;
  for (std::size_t spec : cfg.counts("specs"))
    for (std::size_t n : cfg.counts("n"))
      for (std::size_t t : cfg.counts("t"))
        for (std::size_t f : cfg.counts("factors")) {
          SimSpec s = SimSpec::preset(static_cast<int>(spec), n, t, f, seed, cfg.real("dominant_share"));
          s.gaussian_centering_literal = cfg.flag("gaussian_centering_literal");
          s.scaling = scaling;
          s.burn_in = cfg.count("burn_in");
          s.validate();
          grid.push_back(s);
        }

  std::vector<MonteCarloRow> rows;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& s : grid)
    for (const auto& m : methods) {
      rows.push_back(run_monte_carlo(s, reps, m, workers));
      cells.push_back({{"spec", to_json(s)},
                       {"method", to_json(m)},
                       {"failures", rows.back().failures},
                       {"first_error", rows.back().first_error}});
    }
  b.add("nss.csv", nss_table_csv(rows));
  b.add("dds.csv", dds_table_csv(rows));
  b.manifest["cells"] = cells;
  return b;
}

inline std::string markdown_table(const io::CsvTable& t) {
  std::string out = "|";
  for (const auto& h : t.header) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < t.header.size(); ++i) out += " --- |";
  out += "\n";
  for (const auto& r : t.rows) {
    out += "|";
    for (const auto& c : r) out += " " + c + " |";
    out += "\n";
  }
  return out;
}

/// Plot-ready artifacts from a detect, covnorms or simulate output directory.
inline Bundle cmd_report(const RunConfig& cfg) {
  const std::filesystem::path dir = cfg.str("input");
  if (dir.empty() || !std::filesystem::is_directory(dir))
    throw ConfigError("cli_app", "report input '" + dir.string() + "' is not a directory");
  Bundle b{"report", cfg.str("output"), {}, base_manifest("report", cfg)};
  const std::size_t top = cfg.count("top");
  if (top == 0) throw ConfigError("cli_app", "top must be >= 1");
  const auto has = [&](const char* f) { return std::filesystem::is_regular_file(dir / f); };
  if (!has("norms.csv") && !has("dds.csv") && !has("nss.csv"))
    throw ConfigError("cli_app", "no detect or simulate outputs in '" + dir.string() + "'");

  std::string summary = "# d2ml report\n\n";
  nlohmann::json sources = nlohmann::json::object();
  if (has("norms.csv")) {
    const std::string text = io::read_file((dir / "norms.csv").string());
    sources["norms.csv"] = io::fnv1a64(text);
    const io::CsvTable t = io::parse_csv(text);
    const std::size_t c_series = t.column("series"), c_norm = t.column("norm"), c_share = t.column("share"),
                      c_dom = t.column("dominant");
    std::vector<std::size_t> idx(t.rows.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<double> norm(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (t.rows[i].size() != t.header.size())
        throw DataError("cli_app", "norms.csv row " + std::to_string(i + 2) + " has the wrong width");
      const auto v = io::parse_double(t.rows[i][c_norm]);
      if (!v) throw DataError("cli_app", "norms.csv row " + std::to_string(i + 2) + ": bad norm");
      norm[i] = *v;
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return norm[a] > norm[b]; });
    io::CsvTable largest{{"rank", "series", "norm", "share", "dominant"}, {}};
    std::vector<SeriesId> dominant;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto& row = t.rows[idx[r]];
      if (row[c_dom] == "1") dominant.push_back(SeriesId::parse(row[c_series]));
      if (r < top)
        largest.rows.push_back({std::to_string(r + 1), row[c_series], io::format_double(norm[idx[r]]),
                                row[c_share], row[c_dom]});
    }
    std::string csv = "rank,series,norm,share,dominant\n";
    for (const auto& r : largest.rows) csv += r[0] + "," + r[1] + "," + r[2] + "," + r[3] + "," + r[4] + "\n";
    b.add("largest" + std::to_string(top) + ".csv", csv);

    std::vector<Edge> edges;
    if (has("edges.json")) {
      const std::string etext = io::read_file((dir / "edges.json").string());
      sources["edges.json"] = io::fnv1a64(etext);
      const nlohmann::json arr = nlohmann::json::parse(etext, nullptr, false);
      if (arr.is_discarded() || !arr.is_array()) throw DataError("cli_app", "edges.json is not a JSON array");
      for (const auto& e : arr) {
        Edge edge;
        edge.from_id = SeriesId::parse(e.at("from").get<std::string>());
        edge.to_id = SeriesId::parse(e.at("to").get<std::string>());
        edge.weight = e.at("weight").get<double>();
        edge.dominant_origin = e.value("dominant_origin", false);
        edges.push_back(edge);
      }
    }
    b.add("graph.dot", to_dot(dominant, edges));

    summary += "## Largest " + std::to_string(std::min(top, idx.size())) + " column norms\n\n" +
               markdown_table(largest) + "\n";
    summary += "Dominant drivers (" + std::to_string(dominant.size()) + "):";
    for (const auto& d : dominant) summary += " " + d.label();
    summary += "\n\n";
  }
  for (const char* f : {"nss.csv", "dds.csv"}) {
    if (!has(f)) continue;
    const std::string text = io::read_file((dir / f).string());
    sources[f] = io::fnv1a64(text);
    summary += std::string("## ") + f + "\n\n" + markdown_table(io::parse_csv(text)) + "\n";
  }
  b.add("summary.md", summary);
  b.manifest["sources"] = sources;
  return b;
}

inline Bundle run(const std::string& command, const RunConfig& cfg) {
  if (command == "detect") return cmd_detect(cfg);
  if (command == "covnorms") return cmd_covnorms(cfg);
  if (command == "simulate") return cmd_simulate(cfg);
  if (command == "report") return cmd_report(cfg);
  throw ConfigError("cli_app", "unknown command '" + command + "'");
}

}  // namespace d2ml::app
