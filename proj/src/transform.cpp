#include "ballistic/transform.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ballistic/fft.hpp"

namespace ballistic {

namespace {

bool same_grid(const Grid& a, const Grid& b) {
  return a.n1 == b.n1 && a.n2 == b.n2 && a.L1 == b.L1 && a.L2 == b.L2;
}

int commensurate_stride(double L, double P, int n, const char* axis) {
  const double ratio = L / P;
  const double r = std::round(ratio);
  if (r < 1.0 || std::fabs(ratio - r) > 1e-9 * std::max(1.0, ratio)) {
    throw BoxError(std::string("box side ") + axis + " = " + std::to_string(L) +
                   " is not an integer multiple of the potential period " + std::to_string(P));
  }
  const int stride = static_cast<int>(r);
  if (n % stride != 0) {
    throw BoxError(std::string("coset stride ") + std::to_string(stride) + " along axis " + axis +
                   " does not divide the resolution " + std::to_string(n));
  }
  return stride;
}

// Offsets (d1, d2) on the dual grid with |(d1 dk1, d2 dk2)| <= radius (inclusive up to round-off).
std::vector<std::array<int, 2>> disc_offsets(const Grid& g, double radius) {
  std::vector<std::array<int, 2>> out;
  const int r1 = static_cast<int>(std::floor(radius / g.dk1() + 1e-9));
  const int r2 = static_cast<int>(std::floor(radius / g.dk2() + 1e-9));
  const double lim = radius * radius * (1.0 + 1e-12);
  for (int a = -r1; a <= r1; ++a) {
    for (int b = -r2; b <= r2; ++b) {
      const double d1 = a * g.dk1(), d2 = b * g.dk2();
      if (d1 * d1 + d2 * d2 <= lim) out.push_back({a, b});
    }
  }
  return out;
}

// Dual-grid neighbour of FFT index (i, j) shifted by (a, b) in signed index space; -1 when the
// shift leaves the represented band [-N/2, N/2).
long neighbour(const Grid& g, int i, int j, int a, int b) {
  const int s1 = Grid::signed_index(i, g.n1) + a;
  const int s2 = Grid::signed_index(j, g.n2) + b;
  if (s1 < -g.n1 / 2 || s1 >= g.n1 / 2 || s2 < -g.n2 / 2 || s2 >= g.n2 / 2) return -1;
  return static_cast<long>(g.flat(Grid::wrap_index(s1, g.n1), Grid::wrap_index(s2, g.n2)));
}

void check_mask(const Grid& g, const std::vector<char>& mask) {
  if (mask.size() != g.size()) throw InputError("mask size does not match the dual grid");
}

void check_field(const Grid& g, const std::vector<cplx>& f) {
  if (f.size() != g.size()) throw InputError("amplitude array does not match the dual grid");
}

}  // namespace

std::size_t GridBranches::coset_member(std::size_t idx, std::size_t t) const {
  const int i = static_cast<int>(idx / static_cast<std::size_t>(grid.n2));
  const int j = static_cast<int>(idx % static_cast<std::size_t>(grid.n2));
  const int j1 = static_cast<int>(t) / block2;
  const int j2 = static_cast<int>(t) % block2;
  return grid.flat(i % stride1 + j1 * stride1, j % stride2 + j2 * stride2);
}

std::size_t GridBranches::position_in_block(std::size_t idx) const {
  const int i = static_cast<int>(idx / static_cast<std::size_t>(grid.n2));
  const int j = static_cast<int>(idx % static_cast<std::size_t>(grid.n2));
  return static_cast<std::size_t>(i / stride1) * block2 + static_cast<std::size_t>(j / stride2);
}

double GridBranches::member_fraction() const {
  if (member.empty()) return 0.0;
  const auto n = std::count_if(member.begin(), member.end(), [](char m) { return m != 0; });
  return static_cast<double>(n) / static_cast<double>(member.size());
}

std::vector<char> GridBranches::members_with_gap(double min_gap) const {
  std::vector<char> out(member.size());
  for (std::size_t c = 0; c < member.size(); ++c) out[c] = member[c] && gap[c] > min_gap;
  return out;
}

GridBranches free_grid_branches(const Grid& grid) {
  grid.validate();
  GridBranches b;
  b.grid = grid;
  b.stride1 = grid.n1;
  b.stride2 = grid.n2;
  const std::size_t n = grid.size();
  b.lambda.resize(n);
  b.weight.assign(n, 1.0);
  b.gap.assign(n, std::numeric_limits<double>::infinity());
  b.grad.resize(n);
  b.member.assign(n, 1);
  b.coefficients.assign(n, cplx{1.0, 0.0});
  for (int i = 0; i < grid.n1; ++i) {
    for (int j = 0; j < grid.n2; ++j) {
      const Vec2 k = grid.k(i, j);
      b.lambda[grid.flat(i, j)] = k.norm2();
      b.grad[grid.flat(i, j)] = k * 2.0;
    }
  }
  return b;
}

GridBranches build_grid_branches(const FourierSeries& V, const Grid& grid, const GridBranchOptions& o) {
  grid.validate();
  if (!(o.theta >= 0.0 && o.theta <= 1.0)) throw InputError("theta must lie in [0,1]");
  std::vector<std::pair<std::array<std::int64_t, 2>, cplx>> terms;
  for (const auto& [label, c] : V.coefficients) {
    if (c != cplx{0.0, 0.0}) terms.push_back({{label[0], label[1]}, c});
  }
  if (terms.empty()) {
    auto b = free_grid_branches(grid);
    b.theta = o.theta;
    b.gap_min = o.gap_min;
    return b;
  }
  if (V.module.kind() != FrequencyModule::Kind::Periodic) {
    throw BoxError("a quasi-periodic potential has no commensurate box; transforms need a periodic approximant");
  }
  const double scale = std::max(1.0, V.l1_norm());
  if (V.hermiticity_defect() > 1e-12 * scale) throw InputError("potential coefficients are not Hermitian");

  GridBranches b;
  b.grid = grid;
  b.theta = o.theta;
  b.gap_min = o.gap_min;
  b.stride1 = commensurate_stride(grid.L1, V.module.period1(), grid.n1, "1");
  b.stride2 = commensurate_stride(grid.L2, V.module.period2(), grid.n2, "2");
  b.block1 = grid.n1 / b.stride1;
  b.block2 = grid.n2 / b.stride2;
  for (const auto& [s, c] : terms) {
    if (2 * std::llabs(s[0]) * b.stride1 >= grid.n1 || 2 * std::llabs(s[1]) * b.stride2 >= grid.n2) {
      throw ResolutionError("potential frequency (" + std::to_string(s[0]) + ", " + std::to_string(s[1]) +
                            ") is not below the grid Nyquist limit");
    }
  }
  const std::size_t n = grid.size();
  const std::size_t bs = b.block_size();
  b.lambda.assign(n, 0.0);
  b.weight.assign(n, 0.0);
  b.gap.assign(n, 0.0);
  b.grad.assign(n, Vec2{});
  b.member.assign(n, 0);
  b.coefficients.assign(n * bs, cplx{0.0, 0.0});

  const auto blocks = static_cast<std::size_t>(b.stride1) * b.stride2;
  parallel_for(blocks, o.workers, [&](std::size_t blk) {
    const int a1 = static_cast<int>(blk / static_cast<std::size_t>(b.stride2));
    const int a2 = static_cast<int>(blk % static_cast<std::size_t>(b.stride2));
    const auto bsi = static_cast<Eigen::Index>(bs);
    std::vector<std::size_t> idx(bs);
    std::vector<Vec2> ks(bs);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(bsi, bsi);
    for (int j1 = 0; j1 < b.block1; ++j1) {
      for (int j2 = 0; j2 < b.block2; ++j2) {
        const std::size_t t = static_cast<std::size_t>(j1) * b.block2 + j2;
        idx[t] = grid.flat(a1 + j1 * b.stride1, a2 + j2 * b.stride2);
        ks[t] = grid.k(a1 + j1 * b.stride1, a2 + j2 * b.stride2);
        H(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t)) = ks[t].norm2();
      }
    }
    // H(t, u) = sum of W(s) over s with j_t - j_u = s (mod block), which includes aliasing.
    for (int j1 = 0; j1 < b.block1; ++j1) {
      for (int j2 = 0; j2 < b.block2; ++j2) {
        const auto t = static_cast<Eigen::Index>(j1 * b.block2 + j2);
        for (const auto& [s, c] : terms) {
          const int u1 = Grid::wrap_index(j1 - s[0], b.block1);
          const int u2 = Grid::wrap_index(j2 - s[1], b.block2);
          H(t, static_cast<Eigen::Index>(u1 * b.block2 + u2)) += c;
        }
      }
    }
    Eigen::VectorXd values(bsi);
    Eigen::MatrixXcd vectors(bsi, bsi);
    const bool diagonal = (H - Eigen::MatrixXcd(H.diagonal().asDiagonal())).isZero(0.0);
    if (diagonal) {
      values = H.diagonal().real();
      vectors.setIdentity();
    } else if (H.imag().isZero(0.0)) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.real());
      if (es.info() != Eigen::Success) throw NumericError("coset eigensolver failed");
      values = es.eigenvalues();
      vectors = es.eigenvectors().cast<cplx>();
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
      if (es.info() != Eigen::Success) throw NumericError("coset eigensolver failed");
      values = es.eigenvalues();
      vectors = es.eigenvectors();
    }
    std::vector<Eigen::Index> column(bs);
    for (std::size_t t = 0; t < bs; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      const double k2 = ks[t].norm2();
      Eigen::Index best = 0;
      double best_w = -1.0;
      for (Eigen::Index c = 0; c < bsi; ++c) {
        const double w = std::norm(vectors(ti, c));
        const bool better = w > best_w + 1e-15 || (std::fabs(w - best_w) <= 1e-15 &&
                                                  std::fabs(values(c) - k2) < std::fabs(values(best) - k2));
        if (better) {
          best = c;
          best_w = w;
        }
      }
      column[t] = best;
      const std::size_t g = idx[t];
      b.weight[g] = best_w;
      b.lambda[g] = values(best);
      double gap = std::numeric_limits<double>::infinity();
      Vec2 grad{};
      const cplx v0 = vectors(ti, best);
      const cplx phase = std::abs(v0) > 0.0 ? std::conj(v0) / std::abs(v0) : cplx{1.0, 0.0};
      for (std::size_t u = 0; u < bs; ++u) {
        const cplx v = vectors(static_cast<Eigen::Index>(u), best) * phase;
        b.coefficients[g * bs + u] = u == t ? cplx{std::abs(v0), 0.0} : v;
        grad = grad + ks[u] * (2.0 * std::norm(v));
        if (u != t) gap = std::min(gap, std::fabs(ks[u].norm2() - k2));
      }
      b.gap[g] = gap;
      b.grad[g] = grad;
    }
    // A column claimed by several grid points (possible only when theta < 1/2) keeps the point
    // with the largest weight; the others are not members, so member branches stay orthonormal.
    for (std::size_t t = 0; t < bs; ++t) {
      const std::size_t g = idx[t];
      bool claimed = false;
      for (std::size_t u = 0; u < bs && !claimed; ++u) {
        if (u == t || column[u] != column[t]) continue;
        const double wu = b.weight[idx[u]], wt = b.weight[g];
        claimed = wu > wt || (wu == wt && u < t);
      }
      b.member[g] = !claimed && b.weight[g] >= o.theta && b.gap[g] > o.gap_min;
    }
  });
  return b;
}

std::vector<char> erode_mask(const Grid& g, const std::vector<char>& mask, double radius) {
  check_mask(g, mask);
  const auto offs = disc_offsets(g, radius);
  std::vector<char> out(mask.size(), 0);
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) {
      const std::size_t c = g.flat(i, j);
      if (!mask[c]) continue;
      bool keep = true;
      for (const auto& o : offs) {
        const long nb = neighbour(g, i, j, o[0], o[1]);
        if (nb < 0 || !mask[static_cast<std::size_t>(nb)]) {
          keep = false;
          break;
        }
      }
      out[c] = keep;
    }
  }
  return out;
}

std::vector<char> dilate_mask(const Grid& g, const std::vector<char>& mask, double radius) {
  check_mask(g, mask);
  const auto offs = disc_offsets(g, radius);
  std::vector<char> out(mask.size(), 0);
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) {
      if (!mask[g.flat(i, j)]) continue;
      for (const auto& o : offs) {
        const long nb = neighbour(g, i, j, o[0], o[1]);
        if (nb >= 0) out[static_cast<std::size_t>(nb)] = 1;
      }
    }
  }
  return out;
}

CutoffFunction build_eta_delta(const Grid& g, const std::vector<char>& mask, double delta) {
  g.validate();
  check_mask(g, mask);
  const double cell = std::max(g.dk1(), g.dk2());
  if (!(delta >= 2.0 * cell * (1.0 - 1e-12))) {
    throw ResolutionError("cutoff width delta = " + std::to_string(delta) +
                          " is below two dual-grid cells (" + std::to_string(2.0 * cell) + ")");
  }
  CutoffFunction eta;
  eta.grid = g;
  eta.delta = delta;
  eta.base = mask;
  const auto core = erode_mask(g, mask, 0.5 * delta);
  struct Tap {
    int a, b;
    double w;
  };
  std::vector<Tap> taps;
  double total = 0.0;
  for (const auto& o : disc_offsets(g, 0.5 * delta)) {
    const double u1 = 2.0 * o[0] * g.dk1() / delta, u2 = 2.0 * o[1] * g.dk2() / delta;
    const double u2sum = u1 * u1 + u2 * u2;
    if (u2sum >= 1.0) continue;
    const double t = 1.0 - u2sum;
    taps.push_back({o[0], o[1], t * t * t * t});
    total += taps.back().w;
  }
  eta.values.assign(g.size(), 0.0);
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) {
      double in = 0.0, out = 0.0;
      for (const auto& t : taps) {
        const long nb = neighbour(g, i, j, t.a, t.b);
        if (nb >= 0 && core[static_cast<std::size_t>(nb)]) {
          in += t.w;
        } else {
          out += t.w;
        }
      }
      double v = 0.0;
      if (out == 0.0) {
        v = 1.0;
      } else if (in > 0.0) {
        v = std::clamp(in / total, 0.0, 1.0);
      }
      eta.values[g.flat(i, j)] = v;
    }
  }
  // Forward differences: the cell-to-cell slope, which resolves the ramp even at a few cells.
  double sup = 0.0;
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) {
      const long e = neighbour(g, i, j, 1, 0), n = neighbour(g, i, j, 0, 1);
      if (e < 0 || n < 0) continue;
      const double v = eta.values[g.flat(i, j)];
      const double d1 = (eta.values[static_cast<std::size_t>(e)] - v) / g.dk1();
      const double d2 = (eta.values[static_cast<std::size_t>(n)] - v) / g.dk2();
      sup = std::max(sup, std::hypot(d1, d2));
    }
  }
  eta.grad_sup = sup;
  return eta;
}

void MomentumProfile::refresh_decay() {
  decay.fill(0.0);
  for (int i = 0; i < grid.n1; ++i) {
    for (int j = 0; j < grid.n2; ++j) {
      const double a = std::abs(values[grid.flat(i, j)]);
      if (a == 0.0) continue;
      const double k = grid.k(i, j).norm();
      double p = 1.0;
      for (std::size_t m = 0; m < decay.size(); ++m) {
        decay[m] = std::max(decay[m], p * a);
        p *= k;
      }
    }
  }
}

void MomentumProfile::validate() const {
  if (values.size() != grid.size()) throw InputError("profile does not match its grid");
  for (const auto& v : values) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw InputError("profile has non-finite values");
  }
  for (double d : decay) {
    if (!std::isfinite(d)) throw InputError("profile decay moment up to |k|^6 is not finite");
  }
}

MomentumProfile gaussian_profile(const Grid& grid, const Vec2& k0, double sigma) {
  grid.validate();
  if (!(sigma > 0.0)) throw InputError("Gaussian width must be positive");
  MomentumProfile p;
  p.grid = grid;
  p.values.resize(grid.size());
  for (int i = 0; i < grid.n1; ++i) {
    for (int j = 0; j < grid.n2; ++j) {
      const double d2 = (grid.k(i, j) - k0).norm2();
      p.values[grid.flat(i, j)] = std::exp(-d2 / (4.0 * sigma * sigma));
    }
  }
  p.refresh_decay();
  return p;
}

MomentumProfile ring_profile(const Grid& grid, double k_min, double k_max) {
  grid.validate();
  if (!(k_min >= 0.0) || !(k_max > k_min)) throw InputError("ring needs 0 <= k_min < k_max");
  MomentumProfile p;
  p.grid = grid;
  p.values.assign(grid.size(), cplx{0.0, 0.0});
  const double mid = 0.5 * (k_min + k_max), half = 0.5 * (k_max - k_min);
  for (int i = 0; i < grid.n1; ++i) {
    for (int j = 0; j < grid.n2; ++j) {
      const double u = (grid.k(i, j).norm() - mid) / half;
      if (std::fabs(u) >= 1.0) continue;
      const double t = 1.0 - u * u;
      p.values[grid.flat(i, j)] = t * t * t * t;
    }
  }
  p.refresh_decay();
  return p;
}

MomentumProfile spike_profile(const Grid& grid, const Vec2& k0) {
  grid.validate();
  const long m1 = std::lround(k0.x / grid.dk1());
  const long m2 = std::lround(k0.y / grid.dk2());
  if (m1 < -grid.n1 / 2 || m1 >= grid.n1 / 2 || m2 < -grid.n2 / 2 || m2 >= grid.n2 / 2) {
    throw ResolutionError("spike wavevector lies outside the dual grid");
  }
  MomentumProfile p;
  p.grid = grid;
  p.values.assign(grid.size(), cplx{0.0, 0.0});
  p.values[grid.flat(Grid::wrap_index(m1, grid.n1), Grid::wrap_index(m2, grid.n2))] = 1.0;
  p.refresh_decay();
  return p;
}

double k_norm(const Grid& grid, const std::vector<cplx>& f) {
  check_field(grid, f);
  double s = 0.0;
  for (const auto& v : f) s += std::norm(v);
  return std::sqrt(s * grid.dk_area());
}

WaveField synthesize(const GridBranches& b, const std::vector<cplx>& f) {
  const Grid& g = b.grid;
  check_field(g, f);
  const std::size_t bs = b.block_size();
  const double pref = g.dk_area() / kTwoPi;
  std::vector<cplx> A(g.size(), cplx{0.0, 0.0});
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (f[k] == cplx{0.0, 0.0}) continue;
    if (!b.member[k]) throw InputError("synthesis amplitude is nonzero on a non-member cell");
    const auto c = b.coeffs(k);
    for (std::size_t u = 0; u < bs; ++u) A[b.coset_member(k, u)] += pref * f[k] * c[u];
  }
  Fft2 fft(g.n1, g.n2);
  fft.backward(A);
  WaveField out(g);
  out.values = std::move(A);
  return out;
}

std::vector<cplx> analyze(const GridBranches& b, const WaveField& F) {
  const Grid& g = b.grid;
  if (!same_grid(g, F.grid)) throw BoxError("field box/resolution differs from the branch grid");
  std::vector<cplx> hat = F.values;
  Fft2 fft(g.n1, g.n2);
  fft.forward(hat);
  const double dA = g.cell_area();
  const std::size_t bs = b.block_size();
  std::vector<cplx> out(g.size(), cplx{0.0, 0.0});
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!b.member[k]) continue;
    const auto c = b.coeffs(k);
    cplx s{0.0, 0.0};
    for (std::size_t u = 0; u < bs; ++u) s += std::conj(c[u]) * hat[b.coset_member(k, u)];
    out[k] = s * dA / kTwoPi;
  }
  return out;
}

std::vector<cplx> Packet::normalized_amplitudes() const {
  std::vector<cplx> out = amplitudes;
  for (auto& v : out) v /= pre_norm;
  return out;
}

Packet synthesize_packet(const GridBranches& b, const MomentumProfile& profile, const CutoffFunction& cutoff) {
  if (!same_grid(b.grid, profile.grid) || !same_grid(b.grid, cutoff.grid)) {
    throw InputError("profile, cutoff and branches must share the dual grid");
  }
  profile.validate();
  Packet p;
  p.amplitudes.resize(b.grid.size());
  bool any = false;
  for (std::size_t k = 0; k < p.amplitudes.size(); ++k) {
    p.amplitudes[k] = profile.values[k] * cutoff.values[k];
    if (p.amplitudes[k] == cplx{0.0, 0.0}) continue;
    if (!b.member[k]) {
      throw InputError("profile times cutoff is nonzero on a resonant cell (cutoff must live on members)");
    }
    any = true;
  }
  if (!any) throw InputError("empty packet");
  p.field = synthesize(b, p.amplitudes);
  p.pre_norm = p.field.norm();
  for (auto& v : p.field.values) v /= p.pre_norm;
  return p;
}

double parseval_defect(const GridBranches& b, const WaveField& F, const std::vector<char>& window) {
  check_mask(b.grid, window);
  auto t = analyze(b, F);
  double sum = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!window[k] || !b.member[k]) {
      t[k] = 0.0;
    } else {
      sum += std::norm(t[k]);
    }
  }
  sum *= b.grid.dk_area();
  return std::fabs(synthesize(b, t).norm2() - sum);
}

ClosenessReport fourier_closeness(const GridBranches& b, const std::vector<char>& window, std::uint64_t seed,
                                  int iterations) {
  check_mask(b.grid, window);
  ClosenessReport rep;
  rep.iterations = std::max(iterations, 20);
  const std::size_t n = b.grid.size();
  const std::size_t bs = b.block_size();
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < n; ++k) {
    if (window[k] && b.member[k]) active.push_back(k);
  }
  if (active.empty()) return rep;

  // Bound: sup |c_0 - 1| + sum over nonzero coset offsets of sup |C_r|.
  std::vector<double> sup(bs, 0.0);
  for (std::size_t k : active) {
    const auto c = b.coeffs(k);
    const std::size_t self = b.position_in_block(k);
    const int s1 = static_cast<int>(self) / b.block2, s2 = static_cast<int>(self) % b.block2;
    for (std::size_t u = 0; u < bs; ++u) {
      const int r1 = Grid::wrap_index(static_cast<int>(u) / b.block2 - s1, b.block1);
      const int r2 = Grid::wrap_index(static_cast<int>(u) % b.block2 - s2, b.block2);
      const std::size_t r = static_cast<std::size_t>(r1) * b.block2 + r2;
      const double d = u == self ? std::abs(c[u] - 1.0) : std::abs(c[u]);
      sup[r] = std::max(sup[r], d);
    }
  }
  for (double s : sup) rep.bound += s;

  // Exact value: the difference operator is block diagonal over cosets.
  std::vector<std::vector<std::size_t>> by_block(static_cast<std::size_t>(b.stride1) * b.stride2);
  for (std::size_t k : active) {
    const int i = static_cast<int>(k / static_cast<std::size_t>(b.grid.n2));
    const int j = static_cast<int>(k % static_cast<std::size_t>(b.grid.n2));
    by_block[static_cast<std::size_t>(i % b.stride1) * b.stride2 + j % b.stride2].push_back(k);
  }
  for (const auto& cols : by_block) {
    if (cols.empty()) continue;
    Eigen::MatrixXcd D(static_cast<Eigen::Index>(bs), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto coef = b.coeffs(cols[c]);
      const std::size_t self = b.position_in_block(cols[c]);
      for (std::size_t u = 0; u < bs; ++u) {
        D(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(c)) = coef[u] - (u == self ? 1.0 : 0.0);
      }
    }
    const Eigen::MatrixXcd G = D.adjoint() * D;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G, Eigen::EigenvaluesOnly);
    rep.exact = std::max(rep.exact, std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff())));
  }

  // Seeded power iteration on D^* D over the window.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<cplx> f(n, cplx{0.0, 0.0}), y(n);
  for (std::size_t k : active) f[k] = {normal(rng), normal(rng)};
  auto apply_D = [&](const std::vector<cplx>& in, std::vector<cplx>& out) {
    std::fill(out.begin(), out.end(), cplx{0.0, 0.0});
    for (std::size_t k : active) {
      const auto c = b.coeffs(k);
      const std::size_t self = b.position_in_block(k);
      for (std::size_t u = 0; u < bs; ++u) out[b.coset_member(k, u)] += in[k] * (c[u] - (u == self ? 1.0 : 0.0));
    }
  };
  auto apply_Dstar = [&](const std::vector<cplx>& in, std::vector<cplx>& out) {
    std::fill(out.begin(), out.end(), cplx{0.0, 0.0});
    for (std::size_t k : active) {
      const auto c = b.coeffs(k);
      const std::size_t self = b.position_in_block(k);
      cplx s{0.0, 0.0};
      for (std::size_t u = 0; u < bs; ++u) s += std::conj(c[u] - (u == self ? 1.0 : 0.0)) * in[b.coset_member(k, u)];
      out[k] = s;
    }
  };
  auto l2 = [](const std::vector<cplx>& v) {
    double s = 0.0;
    for (const auto& x : v) s += std::norm(x);
    return std::sqrt(s);
  };
  for (int it = 0; it < rep.iterations; ++it) {
    const double nf = l2(f);
    if (nf == 0.0) break;
    for (auto& v : f) v /= nf;
    apply_D(f, y);
    rep.estimate = l2(y);
    apply_Dstar(y, f);
  }
  return rep;
}

double c1_constant(const MomentumProfile& profile, const std::vector<char>& mask, double scale) {
  check_mask(profile.grid, mask);
  check_field(profile.grid, profile.values);
  if (!(scale > 0.0)) throw InputError("profile scale must be positive");
  const Grid& g = profile.grid;
  double s = 0.0;
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) {
      const std::size_t c = g.flat(i, j);
      if (!mask[c]) continue;
      s += g.k(i, j).norm2() * std::norm(profile.values[c] / scale);
    }
  }
  return s * g.dk_area() / 160.0;
}

double group_velocity_constant(const GridBranches& b, const std::vector<cplx>& f) {
  check_field(b.grid, f);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double w = std::norm(f[k]);
    num += b.grad[k].norm2() * w;
    den += w;
  }
  if (!(den > 0.0)) throw InputError("empty packet");
  return 0.5 * num / den;
}

double mean_k2(const Grid& g, const std::vector<cplx>& f) {
  check_field(g, f);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) {
      const double w = std::norm(f[g.flat(i, j)]);
      num += g.k(i, j).norm2() * w;
      den += w;
    }
  }
  if (!(den > 0.0)) throw InputError("empty packet");
  return num / den;
}

}  // namespace ballistic
