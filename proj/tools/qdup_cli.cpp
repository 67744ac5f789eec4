// qdup: run one simulated measurement and write its artifacts.
//
//   qdup g2 --config configs/g2.json --seed 7 --out out/g2 --emit-events
//
// Exit status: 0 success, 2 configuration error, 3 runtime error. Errors are
// reported on stderr as one JSON object.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qdup/runner.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int report(int code, const char* kind, const std::string& key, const std::string& message) {
  qdup::Json err = {{"error", kind}, {"message", message}};
  if (!key.empty()) err["key"] = key;
  std::cerr << err.dump() << std::endl;
  return code;
}

struct Command {
  const char* name;
  const char* help;
  std::vector<qdup::Scenario> accepts;  // first entry is the default
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Command> commands{
      {"budget", "efficiency and photon-energy arithmetic", {qdup::Scenario::kBudget}},
      {"spectrum", "pump-scanned upconversion spectrum", {qdup::Scenario::kSpectrum}},
      {"lifetime",
       "time-resolved PL with a Si (upconverted) or gated InGaAs detector",
       {qdup::Scenario::kLifetimeSi, qdup::Scenario::kLifetimeInGaAs}},
      {"g2", "HBT coincidence histogram and g2(0)", {qdup::Scenario::kG2}},
      {"sweep", "g2(0) against pump power", {qdup::Scenario::kG2PowerSweep}},
      {"response", "instrument response of the phase-matching acceptance", {qdup::Scenario::kInstrumentResponse}},
  };

  CLI::App app{"Quantum-dot upconversion detection simulator"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool emit_events = false;
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "scenario JSON file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed, overrides the config");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--emit-events", emit_events, "also write PHES event dumps");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(kExitConfig, "config_error", "argv", e.what());
  }

  std::size_t which = 0;
  while (!subs[which]->parsed()) ++which;
  const Command& cmd = commands[which];

  qdup::ScenarioConfig cfg;
  try {
    const auto fallback = cmd.accepts.front();
    cfg = config_path.empty() ? qdup::parse_config(qdup::Json::object(), fallback, seed)
                              : qdup::load_config(config_path, fallback, seed);
    if (std::find(cmd.accepts.begin(), cmd.accepts.end(), cfg.scenario) == cmd.accepts.end()) {
      throw qdup::ConfigError("scenario", std::string("scenario \"") + qdup::to_string(cfg.scenario) +
                                              "\" cannot run under the \"" + cmd.name + "\" command");
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (emit_events) cfg.emit_events = true;
  } catch (const qdup::ConfigError& e) {
    return report(kExitConfig, "config_error", e.key(), e.what());
  }

  try {
    const auto out = qdup::run_scenario(cfg);
    qdup::Json line = {{"scenario", qdup::to_string(cfg.scenario)},
                       {"config_hash", out.summary["config_hash"]},
                       {"out", cfg.out_dir.generic_string()},
                       {"files", out.summary["files"]}};
    std::cout << line.dump() << std::endl;
  } catch (const qdup::ConfigError& e) {
    return report(kExitConfig, "config_error", e.key(), e.what());
  } catch (const std::exception& e) {
    return report(kExitRuntime, "runtime_error", "", e.what());
  }
  return 0;
}
