#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace percloss::detail {

// In-place iterative radix-2 complex FFT for one fixed power-of-two size.
// Immutable after construction, so one instance may be shared across threads.
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }

  // X_k = sum_n x_n exp(-2 pi i k n / N)
  void forward(std::span<std::complex<double>> data) const;
  // x_n = sum_k X_k exp(+2 pi i k n / N), no 1/N factor
  void backward(std::span<std::complex<double>> data) const;

 private:
  void transform(std::span<std::complex<double>> data, bool inverse) const;

  std::size_t n_;
  std::vector<std::complex<double>> twiddle_;  // exp(-2 pi i k / N), k < N/2
  std::vector<std::size_t> bitrev_;
};

}  // namespace percloss::detail
