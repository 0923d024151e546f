#include "ballistic/experiments.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"

namespace ballistic {

namespace {

using Json = nlohmann::ordered_json;

std::string short_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Json header(const ExperimentConfig& cfg, const char* schema) {
  Json j;
  j["schema"] = schema;
  j["scenario"] = scenario_name(cfg.kind);
  j["seed"] = cfg.seed;
  j["potential"] = cfg.potential.source;
  j["level"] = cfg.level;
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json violations_json(const ValidationReport& r) {
  Json a = Json::array();
  for (const auto& v : r.violations) a.push_back({{"invariant", v.invariant}, {"location", v.location}, {"detail", v.detail}});
  return a;
}

const Grid& require_grid(const ExperimentConfig& cfg) {
  if (!cfg.grid) throw ConfigError("scenario '" + scenario_name(cfg.kind) + "' needs a grid");
  return *cfg.grid;
}

CutoffFunction cutoff_for(const ExperimentConfig& cfg, const GridBranches& b) {
  const Grid& g = b.grid;
  return build_eta_delta(g, b.member, cfg.mask.delta_cells * std::min(g.dk1(), g.dk2()));
}

// Standard normal complex field with unit L2 norm.
WaveField random_field(const Grid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  WaveField f(g);
  for (auto& v : f.values) {
    const double re = normal(rng);
    const double im = normal(rng);
    v = cplx{re, im};
  }
  const double n = f.norm();
  for (auto& v : f.values) v /= n;
  return f;
}

// --- Scenarios -----------------------------------------------------------------------------------

ScenarioOutcome run_validate(const ExperimentConfig& cfg, ArtifactWriter& out) {
  ScenarioOutcome o;
  Json j = header(cfg, "ballistic-validate/1");
  const auto& pot = cfg.potential;
  if (pot.kind == PotentialSpec::Kind::LimitPeriodic) {
    const auto r = validate_limit_periodic(pot.limit_periodic);
    j["invariants"] = {{"ok", r.ok()}, {"violations", violations_json(r)}};
    o.passed = r.ok();
    o.lines.push_back(std::string("limit-periodic invariants: ") + (r.ok() ? "pass" : "FAIL"));
  } else if (pot.kind == PotentialSpec::Kind::QuasiPeriodic) {
    const auto& p = pot.quasi_periodic;
    const auto r = validate_quasi_periodic(p);
    j["invariants"] = {{"ok", r.ok()}, {"violations", violations_json(r)}};
    const auto a1 = check_A1(*p.alpha, cfg.validate.a1);
    Json a1v = Json::array();
    for (const auto& v : a1.violations) {
      a1v.push_back({{"n", v.n}, {"value", static_cast<double>(v.value)}, {"threshold", static_cast<double>(v.threshold)}});
    }
    j["A1"] = {{"holds", a1.holds()},
               {"N0", cfg.validate.a1.N0},
               {"N1", cfg.validate.a1.N1},
               {"search_bound", cfg.validate.a1.search_bound},
               {"zero_branch", cfg.validate.a1.zero_branch},
               {"degenerate_input", a1.degenerate_input},
               {"algebraic_zeros", a1.algebraic_zeros.size()},
               {"rational_zeros", a1.rational_zeros.size()},
               {"candidates_tested", a1.candidates_tested},
               {"violations", a1v}};
    const auto a2 = check_A2(p);
    Json pairs = Json::array();
    for (const auto& v : a2.colinear_pairs) {
      pairs.push_back({{"first", v.first}, {"second", v.second}, {"rational_ratio", v.rational_ratio}});
    }
    j["A2"] = {{"holds", a2.holds()}, {"colinear_pairs", pairs}, {"violations", a2.violations.size()}};
    o.passed = r.ok() && a1.holds() && a2.holds();
    o.lines.push_back(std::string("quasi-periodic invariants: ") + (r.ok() ? "pass" : "FAIL"));
    o.lines.push_back(std::string("A1: ") + (a1.holds() ? "pass" : "FAIL") + " (" +
                      std::to_string(a1.algebraic_zeros.size()) + " algebraic zeros, " +
                      std::to_string(a1.violations.size()) + " violations)");
    o.lines.push_back(std::string("A2: ") + (a2.holds() ? "pass" : "FAIL") + " (" +
                      std::to_string(a2.violations.size()) + " violations)");
  } else {
    j["invariants"] = {{"ok", true}, {"violations", Json::array()}};
    o.lines.push_back("free potential: nothing to validate");
  }
  j["passed"] = o.passed;
  out.write("validate.json", dump(j));
  return o;
}

BranchSolver solver_for(const ExperimentConfig& cfg, double theta) {
  BlochOptions opts;
  opts.theta = theta;
  return BranchSolver(cfg.potential.series(cfg.level), opts);
}

ScenarioOutcome run_bands(const ExperimentConfig& cfg, ArtifactWriter& out) {
  ScenarioOutcome o;
  const auto solver = solver_for(cfg, cfg.bands.theta);
  const auto& r = cfg.bands.rect;
  r.validate();
  std::vector<Vec2> ks;
  ks.reserve(r.size());
  for (int i = 0; i < r.nx; ++i) {
    for (int j = 0; j < r.ny; ++j) ks.push_back(r.center(i, j));
  }
  const auto results = solver.solve_many(ks, cfg.workers);
  out.write("bands.csv", branches_csv(results, cfg.seed));
  std::size_t resonant = 0;
  double max_shift = 0.0;
  for (const auto& res : results) {
    if (const auto* p = std::get_if<DispersionPoint>(&res)) {
      max_shift = std::max(max_shift, std::fabs(p->lambda - p->k.norm2()));
    } else {
      ++resonant;
    }
  }
  Json j = header(cfg, "ballistic-bands/1");
  j["points"] = results.size();
  j["resonant"] = resonant;
  j["theta"] = cfg.bands.theta;
  j["max_abs_lambda_minus_k2"] = max_shift;
  out.write("bands.json", dump(j));
  o.lines.push_back("bands: " + std::to_string(results.size()) + " points, " + std::to_string(resonant) +
                    " resonant, max |lambda - |k|^2| = " + short_number(max_shift));
  return o;
}

ScenarioOutcome run_isoenergy(const ExperimentConfig& cfg, ArtifactWriter& out) {
  ScenarioOutcome o;
  const auto& spec = cfg.isoenergy;
  const auto solver = solver_for(cfg, spec.theta);
  Json j = header(cfg, "ballistic-isoenergy/1");
  Json levels = Json::array();
  std::vector<double> deviation, slope, measure;
  for (double lambda : spec.lambdas) {
    const auto curve = trace_isoenergetic_curve(solver, lambda, spec.directions, cfg.workers, cfg.level);
    const auto d = curve_derivative(curve);
    deviation.push_back(curve.max_deviation());
    slope.push_back(d.max_abs);
    measure.push_back(direction_set_measure(curve));
    out.write("curve_lambda_" + short_number(lambda) + ".csv", curve_csv(curve, cfg.seed));
    levels.push_back({{"lambda", lambda},
                      {"max_deviation", deviation.back()},
                      {"max_dkappa_dphi", slope.back()},
                      {"direction_measure", measure.back()},
                      {"derivative_note", d.note}});
    o.lines.push_back("lambda " + short_number(lambda) + ": max|kappa - sqrt(lambda)| = " +
                      short_number(deviation.back()) + ", max|dkappa/dphi| = " + short_number(slope.back()) +
                      ", measure = " + short_number(measure.back()));
  }
  bool decreasing = true, nondecreasing = true;
  for (std::size_t i = 1; i < deviation.size(); ++i) {
    decreasing &= deviation[i] < deviation[i - 1] && slope[i] < slope[i - 1];
    nondecreasing &= measure[i] >= measure[i - 1];
  }
  j["levels"] = levels;
  j["deviation_and_slope_decrease"] = decreasing;
  j["measure_nondecreasing"] = nondecreasing;
  if (spec.mask_rect) {
    MaskOptions mo;
    mo.theta = spec.theta;
    mo.gap_min = spec.gap_min;
    mo.level = cfg.level;
    mo.workers = cfg.workers;
    const auto mask = build_mask(solver, *spec.mask_rect, mo);
    out.write("mask.pgm", mask_pgm(mask.member, spec.mask_rect->nx, spec.mask_rect->ny, cfg.seed));
    j["mask_fraction"] = mask.fraction();
    o.lines.push_back("mask fraction " + short_number(mask.fraction()));
  }
  o.passed = decreasing && nondecreasing;
  j["passed"] = o.passed;
  out.write("isoenergy.json", dump(j));
  o.lines.push_back(std::string("trend: ") + (o.passed ? "pass" : "FAIL"));
  return o;
}

ScenarioOutcome run_transform(const ExperimentConfig& cfg, ArtifactWriter& out) {
  ScenarioOutcome o;
  const auto b = branches_for(cfg);
  const Grid& g = b.grid;
  const auto& spec = cfg.transform;
  out.write("grid_mask.pgm", mask_pgm(b.member, g.n1, g.n2, cfg.seed));

  std::mt19937_64 rng(cfg.seed);
  const std::vector<char> all(g.size(), 1);
  double worst_parseval = 0.0, worst_contraction = 0.0;
  for (int r = 0; r < spec.random_fields; ++r) {
    const auto F = random_field(g, rng);
    worst_parseval = std::max(worst_parseval, parseval_defect(b, F, all));
    const auto t = analyze(b, F);
    worst_contraction = std::max(worst_contraction, k_norm(g, t) - F.norm());
  }
  const auto window = b.members_with_gap(spec.window_gap);
  const auto closeness = fourier_closeness(b, window, cfg.seed, spec.iterations);
  Json eta = Json::array();
  double eta_min = INFINITY, eta_max = 0.0;
  for (double cells : spec.delta_cells) {
    const auto c = build_eta_delta(g, b.member, cells * std::min(g.dk1(), g.dk2()));
    eta.push_back({{"delta_cells", cells}, {"grad_sup_times_delta", c.grad_sup_times_delta()}});
    eta_min = std::min(eta_min, c.grad_sup_times_delta());
    eta_max = std::max(eta_max, c.grad_sup_times_delta());
  }

  Json j = header(cfg, "ballistic-transform/1");
  j["member_fraction"] = b.member_fraction();
  j["block_size"] = b.block_size();
  j["parseval_defect_max"] = worst_parseval;
  j["contraction_excess_max"] = worst_contraction;
  j["random_fields"] = spec.random_fields;
  j["closeness"] = {{"window_gap", spec.window_gap},
                    {"estimate", closeness.estimate},
                    {"exact", closeness.exact},
                    {"bound", closeness.bound},
                    {"iterations", closeness.iterations}};
  j["eta"] = eta;
  o.lines.push_back("member fraction " + short_number(b.member_fraction()) + ", Parseval defect " +
                    short_number(worst_parseval) + ", contraction excess " + short_number(worst_contraction));
  o.lines.push_back("closeness estimate " + short_number(closeness.estimate) + " <= bound " +
                    short_number(closeness.bound));

  const auto profile = profile_for(cfg, g);
  out.write("profile.csv", profile_csv(profile, cfg.seed));
  try {
    const auto packet = synthesize_packet(b, profile, cutoff_for(cfg, b));
    out.write("packet.bin", packet_binary(packet.field, cfg.seed));
    j["packet_pre_norm"] = packet.pre_norm;
  } catch (const InputError& e) {
    j["packet_note"] = e.what();
    o.lines.push_back(std::string("packet: ") + e.what());
  }
  o.passed = worst_contraction <= 1e-12 && closeness.estimate <= closeness.bound * (1.0 + 1e-12);
  j["passed"] = o.passed;
  out.write("transform.json", dump(j));
  return o;
}

ScenarioOutcome run_transport(const ExperimentConfig& cfg, ArtifactWriter& out) {
  ScenarioOutcome o;
  const auto b = branches_for(cfg);
  const auto profile = profile_for(cfg, b.grid);
  Packet packet;
  try {
    packet = synthesize_packet(b, profile, cutoff_for(cfg, b));
  } catch (const InputError& e) {
    // Profile supported on resonant cells only: nothing to claim.
    Json j = header(cfg, "ballistic-transport/1");
    j["notes"] = Json::array({std::string("empty mask: ") + e.what() + "; no claim"});
    j["passed"] = true;
    out.write("transport.json", dump(j));
    o.lines.push_back(std::string("empty mask: ") + e.what() + "; no claim");
    return o;
  }
  out.write("packet.bin", packet_binary(packet.field, cfg.seed));
  const Propagator prop(b.grid, potential_samples(cfg));
  TransportOptions opts;
  opts.Ts = cfg.transport.Ts;
  opts.dt = cfg.transport.dt;
  opts.sample_every = cfg.transport.sample_every;
  opts.abel_horizon = cfg.transport.horizon;
  opts.potential_id = cfg.potential.source;
  const auto rep = ballistic_check(packet, profile, b, prop, opts);
  out.write("moments.csv", moment_series_csv(rep.series, cfg.seed));
  out.write("transport.json", transport_report_json(rep, cfg.seed, cfg.potential.source));
  o.passed = rep.trusted && rep.floor_holds;
  if (rep.Ts.size() >= 5) {
    o.lines.push_back("beta (Abel) = " + short_number(rep.fit_abel.beta) + " +- " + short_number(rep.fit_abel.band) +
                      ", beta (Cesaro) = " + short_number(rep.fit_cesaro.beta) + " +- " +
                      short_number(rep.fit_cesaro.band));
  }
  o.lines.push_back("c1 = " + short_number(rep.c1) + ", C_gv = " + short_number(rep.c_gv) +
                    ", measured T^2 coefficient = " + short_number(rep.measured_coefficient) + " (ratio " +
                    short_number(rep.coefficient_ratio) + ")");
  o.lines.push_back(std::string("floor c1 T^2: ") + (rep.floor_holds ? "holds from T0 = " + short_number(*rep.T0) : "FAIL") +
                    (rep.trusted ? "" : " [untrusted: wrap risk]"));
  for (const auto& n : rep.notes) o.lines.push_back("note: " + n);
  return o;
}

ScenarioOutcome run_front(const ExperimentConfig& cfg, ArtifactWriter& out) {
  ScenarioOutcome o;
  const auto b = branches_for(cfg);
  const auto profile = profile_for(cfg, b.grid);
  const auto packet = synthesize_packet(b, profile, cutoff_for(cfg, b));
  check_resolution(packet.field);
  const Propagator prop(b.grid, potential_samples(cfg));
  const auto& spec = cfg.front;
  long steps = 1;
  double dt = spec.t;
  if (!prop.is_free() || spec.dt > 0.0) {
    const double target = spec.dt > 0.0 ? spec.dt : prop.default_dt();
    steps = static_cast<long>(std::ceil(spec.t / target - 1e-9));
    dt = spec.t / static_cast<double>(steps);
  }
  const Vec2 x0 = torus_centroid(packet.field);
  const double width = std::sqrt(second_moment(packet.field, x0, x0));
  WaveField psi = packet.field;
  prop.run(psi, dt, steps);
  const auto fp = front_profile(psi, x0, width, b, packet.amplitudes, spec.bin_width, spec.tail_sigma);
  out.write("front.csv", front_csv(fp, cfg.seed));
  Json j = header(cfg, "ballistic-front/1");
  j["t"] = fp.t;
  j["steps"] = steps;
  j["bin_width"] = fp.bin_width;
  j["z_support"] = {fp.z_min_support, fp.z_max_support};
  j["mass_in_band"] = fp.mass_in_band;
  j["tail_radius"] = fp.tail_radius;
  j["tail_measured"] = fp.tail_measured;
  j["tail_predicted"] = fp.tail_predicted;
  j["peak_bin_measured"] = fp.peak_bin_measured;
  j["peak_bin_predicted"] = fp.peak_bin_predicted;
  o.passed = fp.mass_in_band >= 0.999;
  j["passed"] = o.passed;
  out.write("front.json", dump(j));
  o.lines.push_back("front: support z in [" + short_number(fp.z_min_support) + ", " + short_number(fp.z_max_support) +
                    "], mass in band " + short_number(fp.mass_in_band) + ", tail beyond z = " +
                    short_number(fp.tail_radius) + ": " + short_number(fp.tail_measured));
  return o;
}

}  // namespace

GridBranches branches_for(const ExperimentConfig& cfg) {
  const Grid& g = require_grid(cfg);
  g.validate();
  GridBranchOptions opts;
  opts.theta = cfg.mask.theta;
  opts.gap_min = cfg.mask.gap_min;
  opts.workers = cfg.workers;
  if (cfg.potential.is_free()) return free_grid_branches(g);
  return build_grid_branches(cfg.potential.series(cfg.level), g, opts);
}

MomentumProfile profile_for(const ExperimentConfig& cfg, const Grid& grid) {
  if (cfg.packet.profile == PacketSpec::Profile::Ring) return ring_profile(grid, cfg.packet.k_min, cfg.packet.k_max);
  return gaussian_profile(grid, cfg.packet.k0, cfg.packet.sigma);
}

std::vector<double> potential_samples(const ExperimentConfig& cfg) {
  if (cfg.potential.is_free()) return {};
  return sample_series(cfg.potential.series(cfg.level), require_grid(cfg), true, cfg.workers).values;
}

std::string transport_report_json(const TransportReport& r, std::uint64_t seed, const std::string& potential) {
  Json j;
  j["schema"] = "ballistic-transport/1";
  j["seed"] = seed;
  j["potential"] = potential;
  j["dt"] = r.series.dt;
  j["steps"] = r.series.steps;
  j["T"] = r.Ts;
  j["abel"] = r.abel;
  j["abel_remainder_bound"] = r.abel_remainder;
  j["cesaro"] = r.cesaro;
  j["beta_abel"] = {{"beta", r.fit_abel.beta}, {"band", r.fit_abel.band}};
  j["beta_cesaro"] = {{"beta", r.fit_cesaro.beta}, {"band", r.fit_cesaro.band}};
  j["exponents_consistent"] = r.exponents_consistent;
  j["c1"] = r.c1;
  j["c_gv"] = r.c_gv;
  j["measured_coefficient"] = r.measured_coefficient;
  j["coefficient_ratio"] = r.coefficient_ratio;
  j["T0"] = r.T0 ? Json(*r.T0) : Json(nullptr);
  j["floor_holds"] = r.floor_holds;
  j["upper_bound_holds"] = r.upper_bound_holds;
  j["upper_bound_ratio"] = r.upper_bound_ratio;
  j["trusted"] = r.trusted;
  j["box_ok"] = r.box_ok;
  j["max_group_speed"] = r.max_group_speed;
  j["momentum_width"] = r.momentum_width;
  j["mask_fraction"] = r.mask_fraction;
  j["initial_moment"] = r.initial_moment;
  j["norm_drift"] = r.norm_drift;
  j["energy_drift"] = r.energy_drift;
  j["notes"] = r.notes;
  return dump(j);
}

ScenarioOutcome run_scenario(const ExperimentConfig& cfg, ArtifactWriter& out) {
  switch (cfg.kind) {
    case ScenarioKind::Validate: return run_validate(cfg, out);
    case ScenarioKind::Bands: return run_bands(cfg, out);
    case ScenarioKind::Isoenergy: return run_isoenergy(cfg, out);
    case ScenarioKind::Transform: return run_transform(cfg, out);
    case ScenarioKind::Transport: return run_transport(cfg, out);
    case ScenarioKind::Front: return run_front(cfg, out);
  }
  throw ConfigError("unknown scenario");
}

}  // namespace ballistic
