// Command-line driver: runs one experiment from a YAML configuration and writes its artifacts
// plus a manifest of content hashes.
//
// Exit status: 0 all checks passed, 1 a scenario check failed, 2 configuration or usage error,
// 3 numerical or module error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ballistic/config.hpp"
#include "ballistic/experiments.hpp"
#include "ballistic/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitChecksFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitModule = 3;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool quiet{false};
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("config_pos", o.config, "configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--config", o.config, "configuration file")->envname("BALLISTIC_CONFIG")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory (default: the config's 'output', else out/<scenario>)")
      ->envname("BALLISTIC_OUT");
  cmd->add_option("--seed", o.seed, "seed for randomized estimators (overrides the config)")->envname("BALLISTIC_SEED");
  cmd->add_option("--workers", o.workers, "worker threads (overrides the config)")
      ->envname("BALLISTIC_WORKERS")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", o.quiet, "print nothing on success")->envname("BALLISTIC_QUIET");
}

int execute(const Options& o, const std::optional<ballistic::ScenarioKind>& expected) {
  using namespace ballistic;
  if (o.config.empty()) {
    std::cerr << "error: no configuration given (positional, --config or BALLISTIC_CONFIG)\n";
    return kExitConfig;
  }
  ExperimentConfig cfg;
  try {
    cfg = load_config(o.config);
    if (expected && *expected != cfg.kind) {
      throw ConfigError("subcommand '" + scenario_name(*expected) + "' given a '" + scenario_name(cfg.kind) +
                        "' configuration");
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << o.config << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << o.config << ": " << e.what() << "\n";
    return kExitConfig;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  std::filesystem::path dir = !o.out.empty()              ? std::filesystem::path(o.out)
                              : !cfg.output.empty()       ? std::filesystem::path(cfg.output)
                                                          : std::filesystem::path("out") / scenario_name(cfg.kind);
  try {
    ArtifactWriter writer(dir, cfg.seed);
    const auto outcome = run_scenario(cfg, writer);
    writer.write_manifest(sha256_hex(cfg.text), scenario_name(cfg.kind));
    if (!o.quiet || !outcome.passed) {
      std::cout << scenario_name(cfg.kind) << " (seed " << cfg.seed << ") -> " << dir.string() << "\n";
      for (const auto& line : outcome.lines) std::cout << "  " << line << "\n";
      std::cout << (outcome.passed ? "PASS" : "FAIL") << "\n";
    }
    return outcome.passed ? kExitOk : kExitChecksFailed;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << o.config << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitModule;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitModule;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ballistic transport experiments for limit-periodic and quasi-periodic Schrodinger operators"};
  app.require_subcommand(1);
  Options opts;
  std::optional<ballistic::ScenarioKind> expected;

  auto* run = app.add_subcommand("run", "run the scenario named in the configuration");
  add_common(run, opts);
  for (auto kind : {ballistic::ScenarioKind::Validate, ballistic::ScenarioKind::Bands,
                    ballistic::ScenarioKind::Isoenergy, ballistic::ScenarioKind::Transform,
                    ballistic::ScenarioKind::Transport, ballistic::ScenarioKind::Front}) {
    auto* cmd = app.add_subcommand(ballistic::scenario_name(kind), "run a '" + ballistic::scenario_name(kind) +
                                                                       "' configuration");
    add_common(cmd, opts);
    cmd->callback([&expected, kind] { expected = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  return execute(opts, expected);
}
