#include "fft.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "percloss/errors.hpp"

namespace percloss::detail {

Fft::Fft(std::size_t n) : n_(n), twiddle_(n / 2), bitrev_(n) {
  if (n < 2 || (n & (n - 1)) != 0)
    throw InvalidArgument("FFT size must be a power of two >= 2");
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(n);
    twiddle_[k] = {std::cos(phase), std::sin(phase)};
  }
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b)
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    bitrev_[i] = r;
  }
}

void Fft::forward(std::span<std::complex<double>> data) const {
  transform(data, false);
}

void Fft::backward(std::span<std::complex<double>> data) const {
  transform(data, true);
}

void Fft::transform(std::span<std::complex<double>> data, bool inverse) const {
  if (data.size() != n_) throw InvalidArgument("FFT buffer size mismatch");
  for (std::size_t i = 0; i < n_; ++i)
    if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);

  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        std::complex<double> w = twiddle_[j * stride];
        if (inverse) w = std::conj(w);
        const std::complex<double> t = w * data[start + j + half];
        data[start + j + half] = data[start + j] - t;
        data[start + j] += t;
      }
    }
  }
}

}  // namespace percloss::detail
