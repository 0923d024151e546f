#pragma once

#include <string>
#include <vector>

#include "ballistic/config.hpp"
#include "ballistic/dynamics.hpp"
#include "ballistic/io.hpp"
#include "ballistic/transform.hpp"

namespace ballistic {

struct ScenarioOutcome {
  bool passed{true};               // every check the scenario asserts held
  std::vector<std::string> lines;  // one-line human-readable results
};

// Runs the scenario described by `cfg` and writes its artifacts through `out`:
//   validate  -> validate.json
//   bands     -> bands.csv, bands.json
//   isoenergy -> curve_lambda_<l>.csv per energy, isoenergy.json, mask.pgm (optional)
//   transform -> transform.json, grid_mask.pgm, profile.csv, packet.bin
//   transport -> moments.csv, transport.json, packet.bin
//   front     -> front.csv, front.json
// Module errors propagate unchanged. The manifest is written by the caller.
ScenarioOutcome run_scenario(const ExperimentConfig& cfg, ArtifactWriter& out);

// Building blocks shared with the Python bindings and the acceptance checks.
GridBranches branches_for(const ExperimentConfig& cfg);
MomentumProfile profile_for(const ExperimentConfig& cfg, const Grid& grid);
std::vector<double> potential_samples(const ExperimentConfig& cfg);

// TransportReport as JSON text (schema "ballistic-transport/1").
std::string transport_report_json(const TransportReport& report, std::uint64_t seed, const std::string& potential);

}  // namespace ballistic
