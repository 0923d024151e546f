#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ballistic/common.hpp"
#include "ballistic/grid.hpp"
#include "ballistic/nonresonant.hpp"
#include "ballistic/potentials.hpp"

namespace ballistic {

// Experiment configuration files are YAML documents. Every mapping accepts only the keys listed in
// docs/config.md; unknown or missing keys raise ConfigError carrying the 1-based line.

enum class ScenarioKind { Validate, Bands, Isoenergy, Transform, Transport, Front };

ScenarioKind parse_scenario_kind(const std::string& name);  // throws ConfigError
std::string scenario_name(ScenarioKind kind);

struct PotentialSpec {
  enum class Kind { Free, LimitPeriodic, QuasiPeriodic };
  Kind kind{Kind::Free};
  LimitPeriodicPotential limit_periodic;
  QuasiPeriodicPotential quasi_periodic;
  std::string source;  // file the potential was read from ("free" for V = 0, "inline")

  // Series used by the solvers: approximant `level` for limit-periodic potentials.
  [[nodiscard]] FourierSeries series(int level) const;
  [[nodiscard]] bool is_free() const { return kind == Kind::Free; }
};

// Potential file: `kind: limit_periodic` (d, R0, eta, coupling, schedule, layers rows
// [r, q1, q2, re, im]) or `kind: quasi_periodic` (alpha string, optional alpha_relation [u, v],
// coupling, terms rows [s1_1, s1_2, s2_1, s2_2, re, im]).
PotentialSpec load_potential(const std::filesystem::path& path);
PotentialSpec parse_potential(const std::string& text, const std::string& source);

struct PacketSpec {
  enum class Profile { Gaussian, Ring };
  Profile profile{Profile::Gaussian};
  Vec2 k0{6.0, 0.0};
  double sigma{0.35};
  double k_min{5.0};
  double k_max{6.0};
};

struct MaskSpec {
  double theta{0.9};
  double gap_min{0.0};
  double delta_cells{4.0};
};

struct ValidateSpec {
  A1Options a1;
};

struct BandsSpec {
  KRect rect{4.0, 8.0, 4.0, 8.0, 16, 16};
  double theta{0.9};
};

struct IsoenergySpec {
  std::vector<double> lambdas{16.0, 36.0, 64.0};
  int directions{360};
  std::optional<KRect> mask_rect;
  double theta{0.9};
  double gap_min{0.0};
};

struct TransformSpec {
  int random_fields{20};
  int iterations{40};
  double window_gap{4.0};
  std::vector<double> delta_cells{4.0, 8.0, 16.0};
};

struct TransportSpec {
  std::vector<double> Ts;
  double dt{0.0};  // 0 = propagator default
  long sample_every{1};
  double horizon{6.0};
};

struct FrontSpec {
  double t{16.0};
  double dt{0.0};  // 0 = one exact step for V = 0, else the propagator default
  double bin_width{0.5};
  double tail_sigma{3.0};
};

struct ExperimentConfig {
  std::filesystem::path path;
  std::string text;  // raw file contents (hashed into the manifest)
  ScenarioKind kind{ScenarioKind::Validate};
  std::uint64_t seed{0};
  int workers{1};
  std::string output;  // output directory from the file (may be empty)
  PotentialSpec potential;
  int level{1};
  std::optional<Grid> grid;
  PacketSpec packet;
  MaskSpec mask;
  ValidateSpec validate;
  BandsSpec bands;
  IsoenergySpec isoenergy;
  TransformSpec transform;
  TransportSpec transport;
  FrontSpec front;
};

// Potential files referenced by the config are resolved relative to the config's directory.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                              const std::string& source = "<string>");

}  // namespace ballistic
