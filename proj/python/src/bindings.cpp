// Python bindings: scenario runs, branch solves, arithmetic checks and free transport.

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "ballistic/bloch.hpp"
#include "ballistic/config.hpp"
#include "ballistic/dynamics.hpp"
#include "ballistic/experiments.hpp"
#include "ballistic/io.hpp"
#include "ballistic/potentials.hpp"
#include "ballistic/transform.hpp"

namespace py = pybind11;
using namespace ballistic;

namespace {

py::dict run_config(const std::filesystem::path& path, const std::filesystem::path& out,
                    std::optional<std::uint64_t> seed, std::optional<int> workers) {
  auto cfg = load_config(path);
  if (seed) cfg.seed = *seed;
  if (workers) cfg.workers = *workers;
  ScenarioOutcome outcome;
  {
    py::gil_scoped_release release;
    ArtifactWriter writer(out, cfg.seed);
    outcome = run_scenario(cfg, writer);
    writer.write_manifest(sha256_hex(cfg.text), scenario_name(cfg.kind));
  }
  py::dict d;
  d["scenario"] = scenario_name(cfg.kind);
  d["seed"] = cfg.seed;
  d["passed"] = outcome.passed;
  d["lines"] = outcome.lines;
  return d;
}

py::object solve_branch(const std::filesystem::path& potential, double kx, double ky, double theta, int level) {
  const auto spec = load_potential(potential);
  BlochOptions opts;
  opts.theta = theta;
  const BranchSolver solver(spec.series(level), opts);
  const auto res = solver.solve({kx, ky});
  const auto* p = std::get_if<DispersionPoint>(&res);
  if (!p) return py::none();
  py::dict d;
  d["lambda"] = p->lambda;
  d["grad"] = py::make_tuple(p->grad.x, p->grad.y);
  d["weight"] = p->weight;
  d["gap"] = p->gap;
  return d;
}

py::dict a1(const std::string& alpha, std::optional<std::pair<std::int64_t, std::int64_t>> relation, double N0,
            std::int64_t N1, std::int64_t search_bound) {
  std::optional<QuadraticRelation> rel;
  if (relation) rel = QuadraticRelation{relation->first, relation->second};
  A1Options o;
  o.N0 = N0;
  o.N1 = N1;
  o.search_bound = search_bound;
  const auto r = check_A1(Alpha::parse(alpha, rel), o);
  py::dict d;
  d["holds"] = r.holds();
  d["violations"] = r.violations.size();
  d["algebraic_zeros"] = r.algebraic_zeros;
  d["degenerate_input"] = r.degenerate_input;
  return d;
}

bool a2(const std::filesystem::path& potential) {
  const auto spec = load_potential(potential);
  if (spec.kind != PotentialSpec::Kind::QuasiPeriodic) throw InputError("A2 applies to quasi-periodic potentials");
  return check_A2(spec.quasi_periodic).holds();
}

py::dict free_transport(int n, double box, std::pair<double, double> k0, double sigma, std::vector<double> Ts,
                        double dt) {
  const Grid g{n, n, box, box};
  g.validate();
  TransportReport rep;
  {
    py::gil_scoped_release release;
    const auto branches = free_grid_branches(g);
    const auto profile = gaussian_profile(g, {k0.first, k0.second}, sigma);
    const auto packet =
        synthesize_packet(branches, profile, build_eta_delta(g, branches.member, 4.0 * std::min(g.dk1(), g.dk2())));
    TransportOptions opts;
    opts.Ts = std::move(Ts);
    opts.dt = dt;
    rep = ballistic_check(packet, profile, branches, Propagator(g), opts);
  }
  py::dict d;
  d["T"] = py::array_t<double>(rep.Ts.size(), rep.Ts.data());
  d["abel"] = py::array_t<double>(rep.abel.size(), rep.abel.data());
  d["cesaro"] = py::array_t<double>(rep.cesaro.size(), rep.cesaro.data());
  d["initial_moment"] = rep.initial_moment;
  d["c_gv"] = rep.c_gv;
  d["trusted"] = rep.trusted;
  return d;
}

py::tuple read_packet(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto f = read_packet_binary(ss.str());
  py::array_t<std::complex<double>> a({f.grid.n1, f.grid.n2});
  std::copy(f.values.begin(), f.values.end(), a.mutable_data());
  return py::make_tuple(a, py::make_tuple(f.grid.L1, f.grid.L2), f.time);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Ballistic transport experiments for limit-periodic and quasi-periodic Schrodinger operators.";

  // Translators are tried newest first: register the base class before ConfigError.
  py::register_exception<Error>(m, "BallisticError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("run_config", &run_config, py::arg("config"), py::arg("out"), py::arg("seed") = py::none(),
        py::arg("workers") = py::none(),
        "Run the scenario of a YAML configuration, write its artifacts and manifest into `out`.");
  m.def("solve_branch", &solve_branch, py::arg("potential"), py::arg("kx"), py::arg("ky"), py::arg("theta") = 0.9,
        py::arg("level") = 1, "Plane-wave branch at k; None when k is resonant.");
  m.def("check_a1", &a1, py::arg("alpha"), py::arg("relation") = py::none(), py::arg("N0") = 3.0,
        py::arg("N1") = 5, py::arg("search_bound") = 60);
  m.def("check_a2", &a2, py::arg("potential"));
  m.def("free_transport", &free_transport, py::arg("n"), py::arg("box"), py::arg("k0"), py::arg("sigma"),
        py::arg("T"), py::arg("dt"), "Abel and Cesaro means of <X^2> for a free Gaussian packet.");
  m.def("read_packet", &read_packet, py::arg("path"), "Load a packet file: (values[n1, n2], (L1, L2), time).");
  m.def("sha256_hex", [](const py::bytes& b) { return sha256_hex(std::string(b)); });
}
