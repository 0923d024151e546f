#include "ballistic/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ballistic {

namespace {

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : -1; }

// A mapping node with a dotted name used in messages.
class Section {
 public:
  Section(YAML::Node node, std::string name) : node_(std::move(node)), name_(std::move(name)) {
    if (!node_.IsMap()) throw ConfigError("'" + name_ + "' must be a mapping", line_of(node_));
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) throw ConfigError("unknown key '" + qualified(key) + "'", line_of(kv.first));
    }
  }

  [[nodiscard]] bool has(const char* key) const { return static_cast<bool>(node_[key]); }
  [[nodiscard]] YAML::Node child(const char* key) const { return node_[key]; }
  [[nodiscard]] YAML::Node require(const char* key) const {
    if (!node_[key]) throw ConfigError("missing key '" + qualified(key) + "'", line_of(node_));
    return node_[key];
  }
  [[nodiscard]] Section section(const char* key) const { return Section(require(key), qualified(key)); }
  [[nodiscard]] std::string qualified(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }
  [[nodiscard]] int line() const { return line_of(node_); }

  template <class T>
  [[nodiscard]] T get(const char* key) const {
    return convert<T>(require(key), qualified(key));
  }
  template <class T>
  [[nodiscard]] T get_or(const char* key, T fallback) const {
    return has(key) ? convert<T>(node_[key], qualified(key)) : fallback;
  }

  template <class T>
  static T convert(const YAML::Node& n, const std::string& name) {
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("key '" + name + "' has the wrong type", line_of(n));
    }
  }

 private:
  YAML::Node node_;
  std::string name_;
};

void require_range(bool ok, const Section& s, const char* key, const std::string& rule) {
  if (!ok) throw ConfigError("key '" + s.qualified(key) + "' " + rule, line_of(s.child(key)));
}

std::vector<double> number_list(const YAML::Node& n, const std::string& name) {
  if (!n.IsSequence()) throw ConfigError("key '" + name + "' must be a list of numbers", line_of(n));
  std::vector<double> out;
  for (const auto& v : n) out.push_back(Section::convert<double>(v, name));
  return out;
}

// Scalar or [a, b] pair.
std::array<double, 2> pair_or_scalar(const YAML::Node& n, const std::string& name) {
  if (n.IsSequence()) {
    const auto v = number_list(n, name);
    if (v.size() != 2) throw ConfigError("key '" + name + "' needs two entries", line_of(n));
    return {v[0], v[1]};
  }
  const double x = Section::convert<double>(n, name);
  return {x, x};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

YAML::Node load_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("malformed YAML: " + e.msg, e.mark.line >= 0 ? e.mark.line + 1 : -1);
  }
}

PotentialSpec potential_from_node(const YAML::Node& node, const std::string& source) {
  const Section s(node, "");
  const auto kind = s.get<std::string>("kind");
  PotentialSpec spec;
  spec.source = source;
  if (kind == "free") {
    s.allow({"kind"});
    spec.kind = PotentialSpec::Kind::Free;
    return spec;
  }
  if (kind == "limit_periodic") {
    s.allow({"kind", "d", "R0", "eta", "coupling", "schedule", "layers"});
    spec.kind = PotentialSpec::Kind::LimitPeriodic;
    auto& p = spec.limit_periodic;
    if (s.has("d")) {
      const auto d = pair_or_scalar(s.child("d"), "d");
      p.d1 = d[0];
      p.d2 = d[1];
      require_range(p.d1 > 0.0 && p.d2 > 0.0, s, "d", "must be positive");
    }
    p.R0 = s.get_or<double>("R0", 10.0);
    p.eta = s.get_or<double>("eta", 0.5);
    p.coupling = s.get_or<double>("coupling", 1.0);
    if (s.has("schedule")) {
      for (const auto& v : s.child("schedule")) p.schedule.push_back(Section::convert<int>(v, "schedule"));
    }
    const auto rows = s.require("layers");
    if (!rows.IsSequence()) throw ConfigError("key 'layers' must be a list of [r, q1, q2, re, im] rows", line_of(rows));
    std::map<int, PeriodicLayer> layers;
    for (const auto& row : rows) {
      const auto v = number_list(row, "layers");
      if (v.size() != 5) throw ConfigError("layer rows are [r, q1, q2, re, im]", line_of(row));
      const int r = static_cast<int>(v[0]);
      if (r < 1 || r != v[0] || v[1] != std::floor(v[1]) || v[2] != std::floor(v[2])) {
        throw ConfigError("layer index and q must be integers with r >= 1", line_of(row));
      }
      auto& layer = layers[r];
      layer.index = r;
      const IntPair q{static_cast<int>(v[1]), static_cast<int>(v[2])};
      if (layer.coefficients.count(q)) throw ConfigError("duplicate layer coefficient", line_of(row));
      layer.coefficients[q] = cplx{v[3], v[4]};
    }
    for (auto& [r, layer] : layers) p.layers.push_back(std::move(layer));
    return spec;
  }
  if (kind == "quasi_periodic") {
    s.allow({"kind", "alpha", "alpha_relation", "coupling", "terms"});
    spec.kind = PotentialSpec::Kind::QuasiPeriodic;
    auto& p = spec.quasi_periodic;
    std::optional<QuadraticRelation> relation;
    if (s.has("alpha_relation")) {
      const auto v = number_list(s.child("alpha_relation"), "alpha_relation");
      if (v.size() != 2) throw ConfigError("alpha_relation is [u, v] with alpha^2 = u + v alpha", s.line());
      relation = QuadraticRelation{static_cast<std::int64_t>(v[0]), static_cast<std::int64_t>(v[1])};
    }
    try {
      p.alpha = std::make_shared<const Alpha>(Alpha::parse(s.get<std::string>("alpha"), relation));
    } catch (const InputError& e) {
      throw ConfigError(std::string("alpha: ") + e.what(), line_of(s.child("alpha")));
    }
    p.coupling = s.get_or<double>("coupling", 1.0);
    const auto rows = s.require("terms");
    if (!rows.IsSequence()) throw ConfigError("key 'terms' must be a list of rows", line_of(rows));
    for (const auto& row : rows) {
      const auto v = number_list(row, "terms");
      if (v.size() != 6) throw ConfigError("term rows are [s1_1, s1_2, s2_1, s2_2, re, im]", line_of(row));
      for (int i = 0; i < 4; ++i) {
        if (v[i] != std::floor(v[i])) throw ConfigError("frequency labels must be integers", line_of(row));
      }
      p.terms.push_back({{static_cast<int>(v[0]), static_cast<int>(v[1])},
                         {static_cast<int>(v[2]), static_cast<int>(v[3])},
                         cplx{v[4], v[5]}});
    }
    return spec;
  }
  throw ConfigError("unknown potential kind '" + kind + "' (free, limit_periodic, quasi_periodic)",
                    line_of(s.child("kind")));
}

KRect rect_from(const Section& s) {
  s.allow({"kx", "ky", "n"});
  const auto kx = number_list(s.require("kx"), s.qualified("kx"));
  const auto ky = number_list(s.require("ky"), s.qualified("ky"));
  if (kx.size() != 2 || ky.size() != 2) throw ConfigError("'" + s.qualified("kx/ky") + "' are [lo, hi]", s.line());
  const auto n = pair_or_scalar(s.require("n"), s.qualified("n"));
  KRect r{kx[0], kx[1], ky[0], ky[1], static_cast<int>(n[0]), static_cast<int>(n[1])};
  require_range(r.kx1 > r.kx0 && r.ky1 > r.ky0, s, "kx", "must be increasing ranges");
  require_range(r.nx >= 1 && r.ny >= 1, s, "n", "must be at least 1");
  return r;
}

bool is_power_of_two(double n) {
  if (n < 2 || n != std::floor(n)) return false;
  const auto v = static_cast<long long>(n);
  return (v & (v - 1)) == 0;
}

Grid grid_from(const Section& s) {
  s.allow({"resolution", "box"});
  const auto n = pair_or_scalar(s.require("resolution"), s.qualified("resolution"));
  const auto L = pair_or_scalar(s.require("box"), s.qualified("box"));
  require_range(is_power_of_two(n[0]) && is_power_of_two(n[1]), s, "resolution", "must be a power of two");
  require_range(L[0] > 0.0 && L[1] > 0.0, s, "box", "must be positive");
  return Grid{static_cast<int>(n[0]), static_cast<int>(n[1]), L[0], L[1]};
}

PacketSpec packet_from(const Section& s) {
  PacketSpec p;
  const auto profile = s.get<std::string>("profile");
  if (profile == "gaussian") {
    s.allow({"profile", "k0", "sigma"});
    const auto k0 = number_list(s.require("k0"), s.qualified("k0"));
    if (k0.size() != 2) throw ConfigError("'" + s.qualified("k0") + "' is [kx, ky]", s.line());
    p.profile = PacketSpec::Profile::Gaussian;
    p.k0 = {k0[0], k0[1]};
    p.sigma = s.get<double>("sigma");
    require_range(p.sigma > 0.0, s, "sigma", "must be positive");
  } else if (profile == "ring") {
    s.allow({"profile", "k_min", "k_max"});
    p.profile = PacketSpec::Profile::Ring;
    p.k_min = s.get<double>("k_min");
    p.k_max = s.get<double>("k_max");
    require_range(p.k_min >= 0.0 && p.k_max > p.k_min, s, "k_max", "must exceed k_min >= 0");
  } else {
    throw ConfigError("unknown packet profile '" + profile + "' (gaussian, ring)", line_of(s.child("profile")));
  }
  return p;
}

MaskSpec mask_from(const Section& s) {
  s.allow({"theta", "gap_min", "delta_cells"});
  MaskSpec m;
  m.theta = s.get_or<double>("theta", m.theta);
  m.gap_min = s.get_or<double>("gap_min", m.gap_min);
  m.delta_cells = s.get_or<double>("delta_cells", m.delta_cells);
  if (s.has("theta")) require_range(m.theta > 0.0 && m.theta <= 1.0, s, "theta", "must lie in (0, 1]");
  if (s.has("gap_min")) require_range(m.gap_min >= 0.0, s, "gap_min", "must be non-negative");
  if (s.has("delta_cells")) require_range(m.delta_cells >= 2.0, s, "delta_cells", "must be at least 2");
  return m;
}

std::vector<double> t_grid_from(const YAML::Node& n, const std::string& name) {
  std::vector<double> Ts;
  if (n.IsSequence()) {
    Ts = number_list(n, name);
  } else {
    const Section s(n, name);
    s.allow({"min", "max", "count"});
    const double lo = s.get<double>("min");
    const double hi = s.get<double>("max");
    const int count = s.get<int>("count");
    require_range(lo > 0.0 && hi > lo, s, "max", "must exceed min > 0");
    require_range(count >= 2, s, "count", "must be at least 2");
    for (int i = 0; i < count; ++i) Ts.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  }
  if (Ts.empty()) throw ConfigError("key '" + name + "' is empty", line_of(n));
  for (double T : Ts) {
    if (!(T > 0.0)) throw ConfigError("key '" + name + "' needs positive averaging times", line_of(n));
  }
  return Ts;
}

}  // namespace

ScenarioKind parse_scenario_kind(const std::string& name) {
  if (name == "validate") return ScenarioKind::Validate;
  if (name == "bands") return ScenarioKind::Bands;
  if (name == "isoenergy") return ScenarioKind::Isoenergy;
  if (name == "transform") return ScenarioKind::Transform;
  if (name == "transport") return ScenarioKind::Transport;
  if (name == "front") return ScenarioKind::Front;
  throw ConfigError("unknown scenario '" + name + "' (validate, bands, isoenergy, transform, transport, front)");
}

std::string scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Validate: return "validate";
    case ScenarioKind::Bands: return "bands";
    case ScenarioKind::Isoenergy: return "isoenergy";
    case ScenarioKind::Transform: return "transform";
    case ScenarioKind::Transport: return "transport";
    case ScenarioKind::Front: return "front";
  }
  return "unknown";
}

FourierSeries PotentialSpec::series(int level) const {
  switch (kind) {
    case Kind::LimitPeriodic: return limit_periodic.series(level);
    case Kind::QuasiPeriodic: return quasi_periodic.series();
    case Kind::Free: break;
  }
  return LimitPeriodicPotential{}.series_for_layers(0, 0);
}

PotentialSpec parse_potential(const std::string& text, const std::string& source) {
  return potential_from_node(load_yaml(text), source);
}

PotentialSpec load_potential(const std::filesystem::path& path) {
  try {
    return parse_potential(read_file(path), path.string());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                              const std::string& source) {
  const auto root = load_yaml(text);
  if (!root.IsMap()) throw ConfigError("configuration must be a YAML mapping", line_of(root));
  const Section s(root, "");
  s.allow({"scenario", "seed", "workers", "output", "potential", "level", "grid", "packet", "mask", "validate",
           "bands", "isoenergy", "transform", "transport", "front"});

  ExperimentConfig cfg;
  cfg.path = source;
  cfg.text = text;
  const auto scenario = s.get<std::string>("scenario");
  try {
    cfg.kind = parse_scenario_kind(scenario);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), line_of(s.child("scenario")));
  }
  const auto seed = s.get_or<long long>("seed", 0);
  require_range(seed >= 0, s, "seed", "must be non-negative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.workers = s.get_or<int>("workers", 1);
  require_range(cfg.workers >= 1, s, "workers", "must be at least 1");
  cfg.output = s.get_or<std::string>("output", "");
  cfg.level = s.get_or<int>("level", 1);
  require_range(cfg.level >= 1, s, "level", "must be at least 1");

  // Potential: "free", a file path, or an inline mapping.
  const auto pot = s.require("potential");
  if (pot.IsScalar()) {
    const auto ref = pot.as<std::string>();
    if (ref == "free") {
      cfg.potential.kind = PotentialSpec::Kind::Free;
      cfg.potential.source = "free";
    } else {
      const auto file = base_dir / ref;
      if (!std::filesystem::exists(file)) {
        throw ConfigError("potential file '" + ref + "' does not exist", line_of(pot));
      }
      cfg.potential = load_potential(file);
      cfg.potential.source = ref;
    }
  } else {
    cfg.potential = potential_from_node(pot, "inline");
  }

  const bool needs_grid = cfg.kind == ScenarioKind::Transform || cfg.kind == ScenarioKind::Transport ||
                          cfg.kind == ScenarioKind::Front;
  if (s.has("grid")) {
    cfg.grid = grid_from(s.section("grid"));
  } else if (needs_grid) {
    throw ConfigError("missing key 'grid' (resolution and box) for scenario '" + scenario_name(cfg.kind) + "'",
                      s.line());
  }
  if (s.has("packet")) {
    cfg.packet = packet_from(s.section("packet"));
  } else if (cfg.kind == ScenarioKind::Transport || cfg.kind == ScenarioKind::Front) {
    throw ConfigError("missing key 'packet'", s.line());
  }
  if (s.has("mask")) cfg.mask = mask_from(s.section("mask"));

  if (s.has("validate")) {
    const auto v = s.section("validate");
    v.allow({"N0", "N1", "search_bound", "zero_branch"});
    cfg.validate.a1.N0 = v.get_or<double>("N0", cfg.validate.a1.N0);
    cfg.validate.a1.N1 = v.get_or<long long>("N1", cfg.validate.a1.N1);
    cfg.validate.a1.search_bound = v.get_or<long long>("search_bound", cfg.validate.a1.search_bound);
    cfg.validate.a1.zero_branch = v.get_or<bool>("zero_branch", cfg.validate.a1.zero_branch);
    if (v.has("N0")) require_range(cfg.validate.a1.N0 > 0.0, v, "N0", "must be positive");
  }
  if (s.has("bands")) {
    const auto b = s.section("bands");
    b.allow({"rect", "theta"});
    cfg.bands.rect = rect_from(b.section("rect"));
    cfg.bands.theta = b.get_or<double>("theta", cfg.bands.theta);
    if (b.has("theta")) require_range(cfg.bands.theta >= 0.0 && cfg.bands.theta <= 1.0, b, "theta", "must lie in [0, 1]");
  }
  if (s.has("isoenergy")) {
    const auto b = s.section("isoenergy");
    b.allow({"lambdas", "directions", "mask_rect", "theta", "gap_min"});
    if (b.has("lambdas")) cfg.isoenergy.lambdas = number_list(b.child("lambdas"), "isoenergy.lambdas");
    for (double l : cfg.isoenergy.lambdas) {
      if (!(l > 0.0)) throw ConfigError("key 'isoenergy.lambdas' needs positive energies", line_of(b.child("lambdas")));
    }
    cfg.isoenergy.directions = b.get_or<int>("directions", cfg.isoenergy.directions);
    if (b.has("directions")) require_range(cfg.isoenergy.directions >= 360, b, "directions", "must be at least 360");
    if (b.has("mask_rect")) cfg.isoenergy.mask_rect = rect_from(b.section("mask_rect"));
    cfg.isoenergy.theta = b.get_or<double>("theta", cfg.isoenergy.theta);
    cfg.isoenergy.gap_min = b.get_or<double>("gap_min", cfg.isoenergy.gap_min);
  }
  if (s.has("transform")) {
    const auto b = s.section("transform");
    b.allow({"random_fields", "iterations", "window_gap", "delta_cells"});
    cfg.transform.random_fields = b.get_or<int>("random_fields", cfg.transform.random_fields);
    cfg.transform.iterations = b.get_or<int>("iterations", cfg.transform.iterations);
    cfg.transform.window_gap = b.get_or<double>("window_gap", cfg.transform.window_gap);
    if (b.has("delta_cells")) cfg.transform.delta_cells = number_list(b.child("delta_cells"), "transform.delta_cells");
    if (b.has("random_fields")) require_range(cfg.transform.random_fields >= 1, b, "random_fields", "must be at least 1");
    if (b.has("iterations")) require_range(cfg.transform.iterations >= 20, b, "iterations", "must be at least 20");
  }
  if (s.has("transport")) {
    const auto b = s.section("transport");
    b.allow({"T", "dt", "sample_every", "horizon"});
    cfg.transport.Ts = t_grid_from(b.require("T"), "transport.T");
    cfg.transport.dt = b.get_or<double>("dt", 0.0);
    cfg.transport.sample_every = b.get_or<long>("sample_every", 1);
    cfg.transport.horizon = b.get_or<double>("horizon", 6.0);
    if (b.has("dt")) require_range(cfg.transport.dt > 0.0, b, "dt", "must be positive");
    if (b.has("sample_every")) require_range(cfg.transport.sample_every >= 1, b, "sample_every", "must be at least 1");
    if (b.has("horizon")) require_range(cfg.transport.horizon >= 5.0, b, "horizon", "must be at least 5");
  } else if (cfg.kind == ScenarioKind::Transport) {
    throw ConfigError("missing key 'transport'", s.line());
  }
  if (s.has("front")) {
    const auto b = s.section("front");
    b.allow({"t", "dt", "bin_width", "tail_sigma"});
    cfg.front.t = b.get<double>("t");
    cfg.front.dt = b.get_or<double>("dt", 0.0);
    cfg.front.bin_width = b.get_or<double>("bin_width", cfg.front.bin_width);
    cfg.front.tail_sigma = b.get_or<double>("tail_sigma", cfg.front.tail_sigma);
    require_range(cfg.front.t > 0.0, b, "t", "must be positive");
    if (b.has("dt")) require_range(cfg.front.dt > 0.0, b, "dt", "must be positive");
    if (b.has("bin_width")) require_range(cfg.front.bin_width > 0.0, b, "bin_width", "must be positive");
  } else if (cfg.kind == ScenarioKind::Front) {
    throw ConfigError("missing key 'front'", s.line());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  auto cfg = parse_config(read_file(path), path.parent_path(), path.string());
  cfg.path = path;
  return cfg;
}

}  // namespace ballistic
