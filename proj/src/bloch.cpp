#include "ballistic/bloch.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

namespace ballistic {

namespace {

std::vector<ModeLabel> support_of(const FourierSeries& V) {
  std::vector<ModeLabel> s;
  for (const auto& [label, c] : V.coefficients) {
    if (c != cplx{0.0, 0.0}) s.push_back(label);
  }
  return s;
}

void order_and_index(DualLattice& lat) {
  // Index 0 is the origin; the rest sorted by length, then label, for reproducible layouts.
  std::vector<std::size_t> order(lat.labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const bool za = is_zero(lat.labels[a]);
    const bool zb = is_zero(lat.labels[b]);
    if (za != zb) return za;
    const double na = lat.vectors[a].norm2();
    const double nb = lat.vectors[b].norm2();
    if (na != nb) return na < nb;
    return lat.labels[a] < lat.labels[b];
  });
  DualLattice sorted;
  sorted.module = lat.module;
  sorted.cutoff = lat.cutoff;
  for (std::size_t i : order) {
    sorted.labels.push_back(lat.labels[i]);
    sorted.vectors.push_back(lat.vectors[i]);
    sorted.hop_distance.push_back(lat.hop_distance.empty() ? -1 : lat.hop_distance[i]);
  }
  for (std::size_t i = 0; i < sorted.labels.size(); ++i) sorted.index[sorted.labels[i]] = i;
  lat = std::move(sorted);
}

void fill_hops(DualLattice& lat, const std::vector<ModeLabel>& steps) {
  lat.hop_distance.assign(lat.labels.size(), -1);
  std::deque<std::size_t> queue;
  lat.hop_distance[0] = 0;
  queue.push_back(0);
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (const auto& s : steps) {
      const auto it = lat.index.find(lat.labels[i] + s);
      if (it == lat.index.end() || lat.hop_distance[it->second] >= 0) continue;
      lat.hop_distance[it->second] = lat.hop_distance[i] + 1;
      queue.push_back(it->second);
    }
  }
}

void normalize_phase(std::vector<cplx>& c) {
  const double n = std::sqrt(std::accumulate(c.begin(), c.end(), 0.0,
                                             [](double s, const cplx& v) { return s + std::norm(v); }));
  if (!(n > 0.0)) throw NumericError("zero eigenvector");
  cplx phase = std::abs(c[0]) > 0.0 ? std::conj(c[0]) / std::abs(c[0]) : cplx{1.0, 0.0};
  for (auto& v : c) v *= phase / n;
  c[0] = {std::abs(c[0]), 0.0};
}

}  // namespace

DualLattice build_dual_lattice(const FourierSeries& V, double K, int max_hops) {
  if (!(K > 0.0) || !std::isfinite(K)) throw InputError("empty dual lattice: cutoff must be positive");
  DualLattice lat;
  lat.module = V.module;
  lat.cutoff = K;
  const auto steps = support_of(V);
  if (V.module.kind() == FrequencyModule::Kind::Periodic) {
    const auto m1max = static_cast<std::int64_t>(std::floor(K * V.module.period1() / kTwoPi));
    const auto m2max = static_cast<std::int64_t>(std::floor(K * V.module.period2() / kTwoPi));
    for (std::int64_t m1 = -m1max; m1 <= m1max; ++m1) {
      for (std::int64_t m2 = -m2max; m2 <= m2max; ++m2) {
        const ModeLabel label{m1, m2, 0, 0};
        const Vec2 p = V.module.wavevector(label);
        if (p.norm() <= K) {
          lat.labels.push_back(label);
          lat.vectors.push_back(p);
        }
      }
    }
    order_and_index(lat);
    fill_hops(lat, steps);
    if (max_hops > 0) {
      DualLattice kept;
      kept.module = lat.module;
      kept.cutoff = K;
      for (std::size_t i = 0; i < lat.size(); ++i) {
        if (lat.hop_distance[i] >= 0 && lat.hop_distance[i] <= max_hops) {
          kept.labels.push_back(lat.labels[i]);
          kept.vectors.push_back(lat.vectors[i]);
          kept.hop_distance.push_back(lat.hop_distance[i]);
        }
      }
      order_and_index(kept);
      lat = std::move(kept);
    }
    return lat;
  }
  if (max_hops <= 0) {
    throw InputError("a quasi-periodic basis needs a finite hop limit (the module is dense)");
  }
  // Breadth-first growth through the potential's frequencies, staying inside the ball.
  std::map<ModeLabel, int> hops{{ModeLabel{0, 0, 0, 0}, 0}};
  std::deque<ModeLabel> queue{ModeLabel{0, 0, 0, 0}};
  while (!queue.empty()) {
    const ModeLabel cur = queue.front();
    queue.pop_front();
    const int h = hops.at(cur);
    if (h >= max_hops) continue;
    for (const auto& s : steps) {
      const ModeLabel next = cur + s;
      if (hops.count(next)) continue;
      if (V.module.wavevector(next).norm() > K) continue;
      hops[next] = h + 1;
      queue.push_back(next);
    }
  }
  for (const auto& [label, h] : hops) {
    lat.labels.push_back(label);
    lat.vectors.push_back(V.module.wavevector(label));
    lat.hop_distance.push_back(h);
  }
  order_and_index(lat);
  // Closure under negation: the step set is symmetric, so BFS depth is symmetric as well; drop
  // any unmatched point defensively.
  std::vector<std::size_t> unmatched;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    if (!lat.index.count(-lat.labels[i])) unmatched.push_back(i);
  }
  if (!unmatched.empty()) {
    DualLattice kept;
    kept.module = lat.module;
    kept.cutoff = K;
    for (std::size_t i = 0; i < lat.size(); ++i) {
      if (lat.index.count(-lat.labels[i])) {
        kept.labels.push_back(lat.labels[i]);
        kept.vectors.push_back(lat.vectors[i]);
        kept.hop_distance.push_back(lat.hop_distance[i]);
      }
    }
    order_and_index(kept);
    lat = std::move(kept);
  }
  return lat;
}

double BlochMatrix::hermiticity_residual() const {
  return (H - H.adjoint()).cwiseAbs().maxCoeff();
}

double BlochMatrix::resonance_gap() const {
  const double k2 = k.norm2();
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t r = 1; r < lattice->size(); ++r) {
    gap = std::min(gap, std::fabs((k + lattice->vectors[r]).norm2() - k2));
  }
  return gap;
}

BlochMatrix assemble_bloch_matrix(const FourierSeries& V, const Vec2& k, double K, int max_hops) {
  const double fmax = V.max_frequency();
  if (!(K > k.norm() + fmax)) {
    throw InputError("basis cutoff K = " + std::to_string(K) + " must exceed |k| + max frequency = " +
                     std::to_string(k.norm() + fmax));
  }
  const double scale = std::max(1.0, V.l1_norm());
  if (V.hermiticity_defect() > 1e-12 * scale) {
    throw InputError("potential coefficients are not Hermitian (V would not be real)");
  }
  BlochMatrix m;
  m.k = k;
  m.lattice = std::make_shared<const DualLattice>(build_dual_lattice(V, K, max_hops));
  const auto& lat = *m.lattice;
  const auto n = static_cast<Eigen::Index>(lat.size());
  if (n == 0) throw InputError("empty dual lattice");
  m.H = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.H(i, i) = (k + lat.vectors[i]).norm2();
    for (const auto& [s, c] : V.coefficients) {
      const auto it = lat.index.find(lat.labels[i] - s);
      if (it == lat.index.end()) continue;
      m.H(i, static_cast<Eigen::Index>(it->second)) += c;
    }
  }
  return m;
}

BlochMatrix assemble_bloch_matrix(const LimitPeriodicPotential& p, int n, const Vec2& k, double K) {
  return assemble_bloch_matrix(p.series(n), k, K);
}

BlochMatrix assemble_bloch_matrix(const QuasiPeriodicPotential& p, const Vec2& k, double K,
                                  int max_hops) {
  return assemble_bloch_matrix(p.series(), k, K, max_hops);
}

EigenPairs solve_dense(const BlochMatrix& m, std::size_t dense_limit) {
  if (m.size() > dense_limit) {
    throw RangeError("matrix dimension " + std::to_string(m.size()) + " exceeds the dense limit " +
                     std::to_string(dense_limit) + "; use solve_recursive instead");
  }
  // Even real potentials give a real symmetric matrix; the real solver is several times faster.
  if (m.H.imag().isZero(0.0)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> real_solver(m.H.real());
    if (real_solver.info() != Eigen::Success) throw NumericError("dense eigensolver failed");
    return {real_solver.eigenvalues(), real_solver.eigenvectors().cast<cplx>()};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m.H);
  if (solver.info() != Eigen::Success) throw NumericError("dense eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

std::vector<cplx> DispersionPoint::unit_c0() const {
  std::vector<cplx> out(coefficients.size());
  const cplx c0 = coefficients.at(0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = coefficients[i] / c0;
  return out;
}

double DispersionPoint::l1_unit_c0() const {
  double s = 0.0;
  for (const auto& c : unit_c0()) s += std::abs(c);
  return s;
}

BranchResult select_plane_wave_branch(const EigenPairs& pairs, const BlochMatrix& m, double theta) {
  const double k2 = m.k.norm2();
  Eigen::Index best = 0;
  double best_w = -1.0;
  for (Eigen::Index j = 0; j < pairs.vectors.cols(); ++j) {
    const double w = std::norm(pairs.vectors(0, j));
    const bool better =
        w > best_w + 1e-15 ||
        (std::fabs(w - best_w) <= 1e-15 &&
         std::fabs(pairs.values(j) - k2) < std::fabs(pairs.values(best) - k2));
    if (better) {
      best = j;
      best_w = w;
    }
  }
  const double gap = m.resonance_gap();
  if (best_w < theta) return ResonantFlag{m.k, best_w, gap, pairs.values(best)};
  DispersionPoint p;
  p.k = m.k;
  p.lambda = pairs.values(best);
  p.coefficients.resize(m.size());
  for (std::size_t r = 0; r < m.size(); ++r) p.coefficients[r] = pairs.vectors(static_cast<Eigen::Index>(r), best);
  normalize_phase(p.coefficients);
  p.weight = std::norm(p.coefficients[0]);
  p.gap = gap;
  p.lattice = m.lattice;
  p.grad = grad_lambda(p);
  return p;
}

DispersionPoint solve_recursive(const BlochMatrix& m, const RecursiveOptions& o) {
  const auto n = static_cast<Eigen::Index>(m.size());
  const auto& lat = *m.lattice;
  std::vector<char> active(static_cast<std::size_t>(n), 0);
  int reach = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const int h = lat.hop_distance[static_cast<std::size_t>(r)];
    active[static_cast<std::size_t>(r)] = h >= 0 && (o.depth <= 0 || h <= o.depth);
    if (active[static_cast<std::size_t>(r)]) reach = std::max(reach, h);
  }
  // A coefficient h hops away is first touched at iteration h; tiny far coefficients must not be
  // frozen at zero by the absolute stopping rule, so iterate at least twice the reach.
  const int min_iter = 2 * reach + 1;
  Eigen::VectorXcd C = Eigen::VectorXcd::Zero(n);
  C(0) = 1.0;
  double lambda = m.H(0, 0).real();
  const double lambda_scale = std::max(1.0, std::fabs(lambda));
  for (int it = 1; it <= o.max_iter; ++it) {
    const Eigen::VectorXcd HC = m.H * C;
    Eigen::VectorXcd next = Eigen::VectorXcd::Zero(n);
    next(0) = 1.0;
    for (Eigen::Index r = 1; r < n; ++r) {
      if (!active[static_cast<std::size_t>(r)]) continue;
      const double d = m.H(r, r).real();
      const double denom = lambda - d;
      if (std::fabs(denom) < 1e-14 * lambda_scale) {
        throw NonConvergent("vanishing denominator lambda - |k+p_r|^2 at r = " + std::to_string(r) +
                            " (resonant k)");
      }
      next(r) = (HC(r) - m.H(r, r) * C(r)) / denom;
    }
    const double l1 = next.cwiseAbs().sum();
    if (!std::isfinite(l1) || l1 > o.l1_bound) {
      throw NonConvergent("coefficient iteration diverged (l1 norm " + std::to_string(l1) + ")");
    }
    const double next_lambda = (next.adjoint() * (m.H * next))(0).real() / next.squaredNorm();
    const double dl = std::fabs(next_lambda - lambda);
    const double dc = (next - C).cwiseAbs().sum();
    C = next;
    lambda = next_lambda;
    if (it >= min_iter && dl <= o.tol * std::max(1.0, std::fabs(lambda)) && dc <= o.tol) {
      DispersionPoint p;
      p.k = m.k;
      p.lambda = lambda;
      p.coefficients.assign(C.data(), C.data() + n);
      normalize_phase(p.coefficients);
      p.weight = std::norm(p.coefficients[0]);
      p.gap = m.resonance_gap();
      p.lattice = m.lattice;
      p.grad = grad_lambda(p);
      p.iterations = it;
      return p;
    }
  }
  throw NonConvergent("coefficient iteration did not converge in " + std::to_string(o.max_iter) +
                      " iterations");
}

Vec2 grad_lambda(const DispersionPoint& point) {
  if (!point.lattice || point.lattice->size() != point.coefficients.size()) {
    throw InputError("dispersion point has no matching basis");
  }
  double norm = 0.0;
  Vec2 g{0.0, 0.0};
  for (std::size_t r = 0; r < point.coefficients.size(); ++r) {
    const double w = std::norm(point.coefficients[r]);
    norm += w;
    g += 2.0 * w * (point.k + point.lattice->vectors[r]);
  }
  if (std::fabs(norm - 1.0) > 1e-10) {
    throw NumericError("gradient needs a unit-norm eigenvector (norm^2 = " + std::to_string(norm) + ")");
  }
  return g;
}

DecayReport coefficient_decay_profile(const DispersionPoint& point, int j) {
  DecayReport d;
  d.k_norm = point.k.norm();
  d.j = j;
  const auto C = point.unit_c0();
  for (std::size_t r = 0; r < C.size(); ++r) {
    d.l1 += std::abs(C[r]);
    const int h = point.lattice->hop_distance[r];
    if (j > 0 && (h < 0 || h > j)) continue;
    if ((point.k + point.lattice->vectors[r]).norm() < d.k_norm / 4.0) {
      d.inner_sum += std::abs(C[r]);
      ++d.inner_count;
    }
  }
  return d;
}

double fit_decay_power(const std::vector<std::pair<double, double>>& samples) {
  std::vector<std::pair<double, double>> logs;
  for (const auto& [k, s] : samples) {
    if (k > 0.0 && s > 0.0) logs.emplace_back(std::log(k), std::log(s));
  }
  if (logs.size() < 2) throw InputError("decay fit needs at least two positive samples");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : logs) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(logs.size());
  my /= static_cast<double>(logs.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [x, y] : logs) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  if (!(sxx > 0.0)) throw InputError("decay fit needs distinct |k| values");
  return -sxy / sxx;
}

BranchSolver::BranchSolver(FourierSeries series, BlochOptions options)
    : series_(std::move(series)), options_(options) {
  max_frequency_ = series_.max_frequency();
  if (series_.module.kind() == FrequencyModule::Kind::Quasi && options_.max_hops <= 0) {
    options_.max_hops = 4;
  }
  if (!(options_.theta >= 0.0 && options_.theta <= 1.0)) throw InputError("theta must lie in [0,1]");
}

double BranchSolver::cutoff_for(const Vec2& k) const {
  if (options_.cutoff > 0.0) return options_.cutoff;
  return k.norm() + std::max(options_.margin_factor * max_frequency_, 1.0);
}

BlochMatrix BranchSolver::matrix(const Vec2& k) const { return matrix(k, cutoff_for(k)); }

BlochMatrix BranchSolver::matrix(const Vec2& k, double K) const {
  return assemble_bloch_matrix(series_, k, K, options_.max_hops);
}

BranchResult BranchSolver::solve(const Vec2& k) const { return solve(k, cutoff_for(k)); }

BranchResult BranchSolver::solve(const Vec2& k, double K) const {
  const auto m = matrix(k, K);
  return select_plane_wave_branch(solve_dense(m, options_.dense_limit), m, options_.theta);
}

std::vector<BranchResult> BranchSolver::solve_many(const std::vector<Vec2>& ks, int workers) const {
  std::vector<BranchResult> out(ks.size());
  parallel_for(ks.size(), workers, [&](std::size_t i) { out[i] = solve(ks[i]); });
  return out;
}

BranchSolver BranchSolver::with_theta(double theta) const {
  BlochOptions o = options_;
  o.theta = theta;
  return BranchSolver(series_, o);
}

}  // namespace ballistic
