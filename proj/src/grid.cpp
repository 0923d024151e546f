#include "ballistic/grid.hpp"

#include <cmath>

namespace ballistic {

namespace {
bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace

void Grid::validate() const {
  if (!is_power_of_two(n1) || !is_power_of_two(n2)) {
    throw InputError("grid resolution must be a power of two per axis, got " +
                     std::to_string(n1) + "x" + std::to_string(n2));
  }
  if (!(L1 > 0.0) || !(L2 > 0.0) || !std::isfinite(L1) || !std::isfinite(L2)) {
    throw InputError("grid box sides must be positive and finite");
  }
}

double WaveField::norm2() const {
  double s = 0.0;
  for (const auto& v : values) s += std::norm(v);
  return s * grid.cell_area();
}

double WaveField::norm() const { return std::sqrt(norm2()); }

double minimal_image(double d, double L) { return d - L * std::round(d / L); }

}  // namespace ballistic
