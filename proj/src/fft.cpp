#include "ballistic/fft.hpp"

#include <fftw3.h>

#include <mutex>

namespace ballistic {

namespace {
// The FFTW planner is not re-entrant; execution of existing plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct Fft2::Plans {
  fftw_plan forward{nullptr};
  fftw_plan backward{nullptr};
  Plans() = default;
  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;
  ~Plans() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

Fft2::Fft2(int n1, int n2) : plans_(std::make_unique<Plans>()), n1_(n1), n2_(n2) {
  if (n1 <= 0 || n2 <= 0) throw InputError("FFT dimensions must be positive");
  std::vector<cplx> scratch(static_cast<std::size_t>(n1) * n2);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard<std::mutex> lock(planner_mutex());
  plans_->forward = fftw_plan_dft_2d(n1, n2, buf, buf, FFTW_FORWARD, flags);
  plans_->backward = fftw_plan_dft_2d(n1, n2, buf, buf, FFTW_BACKWARD, flags);
  if (!plans_->forward || !plans_->backward) throw NumericError("FFTW planning failed");
}

Fft2::~Fft2() = default;

Fft2::Fft2(Fft2&&) noexcept = default;
Fft2& Fft2::operator=(Fft2&&) noexcept = default;

void Fft2::forward(std::vector<cplx>& data) const {
  if (data.size() != static_cast<std::size_t>(n1_) * n2_) throw InputError("FFT size mismatch");
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plans_->forward, buf, buf);
}

void Fft2::backward(std::vector<cplx>& data) const {
  if (data.size() != static_cast<std::size_t>(n1_) * n2_) throw InputError("FFT size mismatch");
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plans_->backward, buf, buf);
}

}  // namespace ballistic
