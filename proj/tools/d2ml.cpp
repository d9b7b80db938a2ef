// d2ml command-line frontend: detect, covnorms, simulate, report.
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "d2ml/app.hpp"

namespace {

struct Options {
  std::string config_file;
  std::string manifest;
  std::vector<std::string> sets;
  std::string input;
  std::string output;
  std::string workers;
  bool print_config = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config_file, "flat key = value config file");
  cmd->add_option("-m,--manifest", o.manifest, "rerun the configuration stored in a manifest.json");
  cmd->add_option("-s,--set", o.sets, "override one key (key=value); repeatable");
  cmd->add_option("-i,--input", o.input, "input CSV or directory");
  cmd->add_option("-o,--output", o.output, "output directory");
  cmd->add_option("-j,--workers", o.workers, "worker threads");
  cmd->add_flag("--print-config", o.print_config, "print the resolved config and exit");
}

d2ml::RunConfig resolve(const std::string& command, const Options& o) {
  d2ml::RunConfig cfg;
  if (!o.manifest.empty()) {
    const std::string recorded = d2ml::app::command_from_manifest(o.manifest);
    if (recorded != command)
      throw d2ml::ConfigError("cli_app", "manifest was written by '" + recorded + "', not '" + command + "'");
    cfg = d2ml::app::config_from_manifest(o.manifest);
  }
  if (!o.config_file.empty()) {
    const d2ml::RunConfig file = d2ml::RunConfig::parse(d2ml::io::read_file(o.config_file));
    const d2ml::RunConfig defaults;
    for (const auto& [k, v] : file.values())
      if (v != defaults.str(k) || o.manifest.empty()) cfg.set(k, v);
  }
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw d2ml::ConfigError("cli_app", "--set expects key=value, got '" + s + "'");
    cfg.set(d2ml::io::trim(s.substr(0, eq)), d2ml::io::trim(s.substr(eq + 1)));
  }
  if (!o.input.empty()) cfg.set("input", o.input);
  if (!o.output.empty()) cfg.set("output", o.output);
  if (!o.workers.empty()) cfg.set("workers", o.workers);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dominant driver detection with node-wise LASSO networks"};
  app.set_version_flag("--version", D2ML_VERSION);
  app.require_subcommand(1);
  Options opts;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"detect", "node-wise LASSO network and dominant drivers of a panel"},
      {"covnorms", "ratio criterion on the inverse sample covariance"},
      {"simulate", "Monte Carlo grid over the simulation designs"},
      {"report", "largest norms, DOT graph and markdown summary of a prior run"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const d2ml::RunConfig cfg = resolve(command, opts);
    if (opts.print_config) {
      std::cout << cfg.to_text();
      return 0;
    }
    d2ml::app::Bundle bundle = d2ml::app::run(command, cfg);
    bundle.write();
    if (bundle.manifest.contains("dominant")) {
      std::cout << "dominant drivers (" << bundle.manifest["n_dominant"].get<std::size_t>() << "):";
      for (const auto& d : bundle.manifest["dominant"]) std::cout << " " << d.get<std::string>();
      std::cout << "\n";
    }
    std::cout << "wrote " << bundle.files.size() + 1 << " files to " << bundle.dir << "\n";
    return 0;
  } catch (const d2ml::Error& e) {
    std::cerr << "d2ml " << command << ": " << e.what() << "\n";
    return d2ml::app::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "d2ml " << command << ": " << e.what() << "\n";
    return 1;
  }
}
