#pragma once

#include <memory>
#include <vector>

#include "ballistic/common.hpp"

namespace ballistic {

// Two-dimensional complex FFT on a row-major n1 x n2 array. Plans are created once with
// FFTW_ESTIMATE (deterministic plan choice, so repeated runs are bit-identical) and may be
// executed concurrently from several threads.
class Fft2 {
 public:
  Fft2(int n1, int n2);
  ~Fft2();
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;
  Fft2(Fft2&&) noexcept;
  Fft2& operator=(Fft2&&) noexcept;

  // out[m] = sum_j in[j] exp(-2 pi i m.j / n), unnormalized, in place.
  void forward(std::vector<cplx>& data) const;
  // out[j] = sum_m in[m] exp(+2 pi i m.j / n), unnormalized, in place.
  void backward(std::vector<cplx>& data) const;

  [[nodiscard]] int n1() const { return n1_; }
  [[nodiscard]] int n2() const { return n2_; }

 private:
  struct Plans;
  std::unique_ptr<Plans> plans_;
  int n1_{0};
  int n2_{0};
};

}  // namespace ballistic
