#include "ballistic/nonresonant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace ballistic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Normalized bump-weighted average over in-rectangle cells:
//   out(c) = sum_o w(o) f(c + o) / sum_o w(o), offsets restricted to the rectangle.
class BumpAverager {
 public:
  BumpAverager(const KRect& rect, double width) : rect_(rect) {
    const int ri = static_cast<int>(std::floor(width / rect.dkx()));
    const int rj = static_cast<int>(std::floor(width / rect.dky()));
    for (int di = -ri; di <= ri; ++di) {
      for (int dj = -rj; dj <= rj; ++dj) {
        const double ux = di * rect.dkx() / width;
        const double uy = dj * rect.dky() / width;
        const double w = polynomial_bump(ux * ux + uy * uy);
        if (w > 0.0) taps_.push_back({di, dj, w});
      }
    }
  }

  // Returns (sum w f, sum w) at cell (i, j).
  [[nodiscard]] std::pair<double, double> at(const std::vector<double>& f, int i, int j) const {
    double num = 0.0, den = 0.0;
    for (const auto& t : taps_) {
      const int a = i + t.di, b = j + t.dj;
      if (a < 0 || a >= rect_.nx || b < 0 || b >= rect_.ny) continue;
      num += t.w * f[rect_.flat(a, b)];
      den += t.w;
    }
    return {num, den};
  }

 private:
  struct Tap {
    int di, dj;
    double w;
  };
  KRect rect_;
  std::vector<Tap> taps_;
};

ExtendedDispersion blend(const KRect& rect, const std::vector<char>& member,
                         const std::vector<double>& correction, const std::vector<double>* lambda,
                         double width) {
  rect.validate();
  const double cell = std::max(rect.dkx(), rect.dky());
  if (!(width >= cell)) {
    throw InputError("blend width " + std::to_string(width) + " is below the grid spacing " +
                     std::to_string(cell));
  }
  if (member.size() != rect.size() || correction.size() != rect.size()) {
    throw InputError("mask and correction must match the rectangle");
  }
  if (std::none_of(member.begin(), member.end(), [](char m) { return m != 0; })) {
    throw InputError("extension needs at least one non-resonant cell");
  }
  const std::size_t n = rect.size();
  std::vector<double> outside(n), inside(n), weighted(n);
  for (std::size_t c = 0; c < n; ++c) {
    inside[c] = member[c] ? 1.0 : 0.0;
    outside[c] = 1.0 - inside[c];
    weighted[c] = member[c] ? correction[c] : 0.0;
  }
  const BumpAverager avg(rect, width);
  ExtendedDispersion ext;
  ext.rect = rect;
  ext.blend_width = width;
  ext.chi.resize(n);
  ext.correction.resize(n);
  ext.values.resize(n);
  for (int i = 0; i < rect.nx; ++i) {
    for (int j = 0; j < rect.ny; ++j) {
      const std::size_t c = rect.flat(i, j);
      const auto [out_num, den] = avg.at(outside, i, j);
      const double chi = out_num == 0.0 ? 1.0 : std::clamp(1.0 - out_num / den, 0.0, 1.0);
      double cbar = 0.0;
      if (member[c]) {
        cbar = correction[c];
      } else {
        const auto [wnum, wden] = avg.at(weighted, i, j);
        const auto [mnum, mden] = avg.at(inside, i, j);
        (void)wden;
        (void)mden;
        cbar = mnum > 0.0 ? wnum / mnum : 0.0;
      }
      ext.chi[c] = chi;
      ext.correction[c] = chi * cbar;
      const double k2 = rect.center(i, j).norm2();
      ext.values[c] = (member[c] && chi == 1.0 && lambda) ? (*lambda)[c] : k2 + ext.correction[c];
    }
  }
  // Axis-aligned forward differences of orders 1..4.
  static const int binom[5][5] = {{1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
  for (int m = 1; m <= 4; ++m) {
    double sup = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
      const double h = axis == 0 ? rect.dkx() : rect.dky();
      const int ni = axis == 0 ? rect.nx - m : rect.nx;
      const int nj = axis == 0 ? rect.ny : rect.ny - m;
      for (int i = 0; i < ni; ++i) {
        for (int j = 0; j < nj; ++j) {
          double s = 0.0;
          for (int t = 0; t <= m; ++t) {
            const int a = axis == 0 ? i + t : i;
            const int b = axis == 0 ? j : j + t;
            const double sign = ((m - t) % 2 == 0) ? 1.0 : -1.0;
            s += sign * binom[m][t] * ext.correction[rect.flat(a, b)];
          }
          sup = std::max(sup, std::fabs(s) / std::pow(h, m));
        }
      }
    }
    ext.derivative_sup[static_cast<std::size_t>(m - 1)] = sup;
    ext.derivative_scaled[static_cast<std::size_t>(m - 1)] = sup * std::pow(width, m);
  }
  return ext;
}

}  // namespace

void KRect::validate() const {
  if (nx <= 0 || ny <= 0) throw InputError("k-rectangle needs at least one cell per axis");
  if (!(kx1 > kx0) || !(ky1 > ky0) || !std::isfinite(kx0) || !std::isfinite(kx1) ||
      !std::isfinite(ky0) || !std::isfinite(ky1)) {
    throw InputError("k-rectangle is empty");
  }
}

double NonResonantMask::fraction() const {
  if (member.empty()) return 0.0;
  const auto count = std::count_if(member.begin(), member.end(), [](char m) { return m != 0; });
  return static_cast<double>(count) / static_cast<double>(member.size());
}

double NonResonantMask::fraction_in_annulus(double r0, double r1) const {
  std::size_t total = 0, in = 0;
  for (int i = 0; i < rect.nx; ++i) {
    for (int j = 0; j < rect.ny; ++j) {
      const double r = rect.center(i, j).norm();
      if (r < r0 || r >= r1) continue;
      ++total;
      in += member[rect.flat(i, j)] ? 1 : 0;
    }
  }
  if (total == 0) throw InputError("annulus contains no cell centers");
  return static_cast<double>(in) / static_cast<double>(total);
}

NonResonantMask NonResonantMask::rethreshold(double new_theta, double new_gap_min) const {
  NonResonantMask out = *this;
  out.theta = new_theta;
  out.gap_min = new_gap_min;
  for (std::size_t c = 0; c < member.size(); ++c) {
    out.member[c] = weight[c] >= new_theta && gap[c] > new_gap_min;
  }
  return out;
}

NonResonantMask build_mask(const BranchSolver& solver, const KRect& rect, const MaskOptions& o) {
  rect.validate();
  NonResonantMask mask;
  mask.rect = rect;
  mask.level = o.level;
  mask.theta = o.theta;
  mask.gap_min = o.gap_min;
  const std::size_t n = rect.size();
  mask.member.assign(n, 0);
  mask.weight.assign(n, 0.0);
  mask.gap.assign(n, 0.0);
  mask.lambda.assign(n, 0.0);
  mask.grad.assign(n, Vec2{});
  // Classify with theta = 0 so every cell carries its dominant pair; thresholds applied below.
  const BranchSolver all = solver.with_theta(0.0);
  parallel_for(static_cast<std::size_t>(rect.nx), o.workers, [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    for (int j = 0; j < rect.ny; ++j) {
      const std::size_t c = rect.flat(i, j);
      const auto p = std::get<DispersionPoint>(all.solve(rect.center(i, j)));
      mask.weight[c] = p.weight;
      mask.gap[c] = p.gap;
      mask.lambda[c] = p.lambda;
      mask.member[c] = p.weight >= o.theta && p.gap > o.gap_min;
      if (mask.member[c]) mask.grad[c] = p.grad;
    }
  });
  return mask;
}

NonResonantMask intersect_masks(const NonResonantMask& a, const NonResonantMask& b) {
  if (a.member.size() != b.member.size() || a.rect.nx != b.rect.nx || a.rect.ny != b.rect.ny) {
    throw InputError("masks must share the k-rectangle");
  }
  NonResonantMask out = b;
  for (std::size_t c = 0; c < out.member.size(); ++c) out.member[c] = a.member[c] && b.member[c];
  return out;
}

std::variant<double, NoRoot> isoenergetic_radius(const BranchSolver& solver, double lambda,
                                                 double phi, const RadiusOptions& o) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("isoenergetic level must be positive");
  double lo = o.lo > 0.0 ? o.lo : 0.5 * std::sqrt(lambda);
  double hi = o.hi > 0.0 ? o.hi : 1.5 * std::sqrt(lambda);
  if ((o.lo > 0.0) != (o.hi > 0.0) && (o.lo > 0.0 || o.hi > 0.0)) {
    throw InputError("bracket needs both ends");
  }
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) throw InputError("invalid bracket");
  const Vec2 nu{std::cos(phi), std::sin(phi)};
  const double K = solver.cutoff_for(nu * hi);
  auto f = [&](double kappa) -> std::optional<double> {
    const auto r = solver.solve(nu * kappa, K);
    if (const auto* p = std::get_if<DispersionPoint>(&r)) return p->lambda - lambda;
    return std::nullopt;
  };
  auto flo = f(lo);
  auto fhi = f(hi);
  if (!flo || !fhi) return NoRoot{"resonant bracket endpoint"};
  if (*flo == 0.0) return lo;
  if (*fhi == 0.0) return hi;
  if ((*flo > 0.0) == (*fhi > 0.0)) return NoRoot{"no sign change on the bracket"};
  while (hi - lo > o.tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const auto fm = f(mid);
    if (!fm) return NoRoot{"resonant cell at kappa = " + std::to_string(mid)};
    if (*fm == 0.0) return mid;
    if ((*fm > 0.0) == (*flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double IsoenergeticCurve::max_deviation() const {
  double m = 0.0;
  const double r = std::sqrt(lambda);
  for (const auto& s : samples) {
    if (s.member) m = std::max(m, std::fabs(s.kappa - r));
  }
  return m;
}

IsoenergeticCurve trace_isoenergetic_curve(const BranchSolver& solver, double lambda, int n_phi,
                                           int workers, int level) {
  if (n_phi <= 0) throw InputError("need at least one direction");
  IsoenergeticCurve curve;
  curve.lambda = lambda;
  curve.level = level;
  curve.samples.resize(static_cast<std::size_t>(n_phi));
  parallel_for(curve.samples.size(), workers, [&](std::size_t i) {
    const double phi = kTwoPi * static_cast<double>(i) / n_phi;
    const auto r = isoenergetic_radius(solver, lambda, phi);
    auto& s = curve.samples[i];
    s.phi = phi;
    if (const auto* kappa = std::get_if<double>(&r)) {
      s.kappa = *kappa;
      s.member = true;
    } else {
      s.kappa = kNaN;
      s.member = false;
    }
  });
  return curve;
}

double direction_set_measure(const IsoenergeticCurve& curve) {
  if (curve.samples.size() < 360) throw InputError("direction-set measure needs at least 360 directions");
  const auto members = std::count_if(curve.samples.begin(), curve.samples.end(),
                                     [](const CurveSample& s) { return s.member; });
  return kTwoPi * static_cast<double>(members) / static_cast<double>(curve.samples.size());
}

CurveDerivative curve_derivative(const IsoenergeticCurve& curve) {
  const std::size_t n = curve.samples.size();
  CurveDerivative d;
  d.dkappa.assign(n, kNaN);
  if (n < 3) throw InputError("curve derivative needs at least 3 samples");
  const double h = kTwoPi / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = curve.samples[i];
    if (!s.member) continue;
    const auto& prev = curve.samples[(i + n - 1) % n];
    const auto& next = curve.samples[(i + 1) % n];
    if (!prev.member || !next.member) {
      ++d.skipped;
      continue;
    }
    d.dkappa[i] = (next.kappa - prev.kappa) / (2.0 * h);
    d.max_abs = std::max(d.max_abs, std::fabs(d.dkappa[i]));
    ++d.evaluated;
  }
  if (d.evaluated == 0) throw InputError("curve derivative needs at least 3 consecutive member directions");
  if (d.skipped > 0) {
    d.note = "skipped " + std::to_string(d.skipped) + " member directions without member neighbours";
  }
  return d;
}

double polynomial_bump(double u2) {
  if (u2 >= 1.0) return 0.0;
  const double t = 1.0 - u2;
  return t * t * t * t;
}

double ExtendedDispersion::evaluate(const Vec2& k) const {
  const double fx = std::clamp((k.x - rect.kx0) / rect.dkx() - 0.5, 0.0, rect.nx - 1.0);
  const double fy = std::clamp((k.y - rect.ky0) / rect.dky() - 0.5, 0.0, rect.ny - 1.0);
  const int i0 = std::min(static_cast<int>(fx), rect.nx - 1);
  const int j0 = std::min(static_cast<int>(fy), rect.ny - 1);
  const int i1 = std::min(i0 + 1, rect.nx - 1);
  const int j1 = std::min(j0 + 1, rect.ny - 1);
  const double tx = fx - i0, ty = fy - j0;
  const double c = (1 - tx) * (1 - ty) * correction[rect.flat(i0, j0)] +
                   tx * (1 - ty) * correction[rect.flat(i1, j0)] +
                   (1 - tx) * ty * correction[rect.flat(i0, j1)] + tx * ty * correction[rect.flat(i1, j1)];
  return k.norm2() + c;
}

ExtendedDispersion extend_dispersion(const NonResonantMask& mask, double blend_width) {
  std::vector<double> correction(mask.rect.size());
  for (int i = 0; i < mask.rect.nx; ++i) {
    for (int j = 0; j < mask.rect.ny; ++j) {
      const std::size_t c = mask.rect.flat(i, j);
      correction[c] = mask.lambda[c] - mask.rect.center(i, j).norm2();
    }
  }
  return blend(mask.rect, mask.member, correction, &mask.lambda, blend_width);
}

ExtendedDispersion extend_correction(const KRect& rect, const std::vector<char>& member,
                                     const std::vector<double>& correction, double blend_width) {
  return blend(rect, member, correction, nullptr, blend_width);
}

}  // namespace ballistic
