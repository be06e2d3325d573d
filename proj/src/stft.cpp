#include <cmath>
#include <numbers>

#include "fft.hpp"
#include "percloss/errors.hpp"
#include "percloss/signal.hpp"

namespace percloss {

namespace {

void check_grid(std::size_t window_len, std::size_t hop) {
  if (window_len < 4 || (window_len & (window_len - 1)) != 0)
    throw InvalidArgument("window length must be a power of two");
  if (hop * 2 != window_len)
    throw InvalidArgument("hop must be half the window length");
}

// Sum over frames of w^2 at every padded sample position.
std::vector<double> window_power_sum(const std::vector<double>& window,
                                     std::size_t frames, std::size_t hop,
                                     std::size_t padded_length) {
  std::vector<double> norm(padded_length, 0.0);
  for (std::size_t m = 0; m < frames; ++m)
    for (std::size_t n = 0; n < window.size(); ++n)
      norm[m * hop + n] += window[n] * window[n];
  return norm;
}

}  // namespace

Spectrogram::Spectrogram(std::size_t frames, std::size_t window_len,
                         std::size_t hop, std::size_t signal_length)
    : frames(frames),
      bins(window_len / 2 + 1),
      window_len(window_len),
      hop(hop),
      signal_length(signal_length),
      values(frames * (window_len / 2 + 1)) {}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t n = 0; n < length; ++n)
    w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi *
                                 static_cast<double>(n) /
                                 static_cast<double>(length)));
  return w;
}

Spectrogram stft(std::span<const double> signal, std::size_t window_len,
                 std::size_t hop) {
  check_grid(window_len, hop);
  if (signal.size() < window_len)
    throw InvalidArgument("signal shorter than one analysis window");

  const std::size_t pad = window_len / 2;
  const std::size_t frames = 1 + signal.size() / hop;
  Spectrogram spec(frames, window_len, hop, signal.size());
  const auto window = hann_window(window_len);
  const detail::Fft fft(window_len);

  std::vector<std::complex<double>> buffer(window_len);
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t n = 0; n < window_len; ++n) {
      // Position in the unpadded signal; outside it the pad is zero.
      const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(m * hop + n) -
                               static_cast<std::ptrdiff_t>(pad);
      const double x = (t >= 0 && t < static_cast<std::ptrdiff_t>(signal.size()))
                           ? signal[static_cast<std::size_t>(t)]
                           : 0.0;
      buffer[n] = {x * window[n], 0.0};
    }
    fft.forward(buffer);
    auto row = spec.frame(m);
    for (std::size_t k = 0; k < spec.bins; ++k) row[k] = buffer[k];
  }
  return spec;
}

std::vector<double> istft_ls(const Spectrogram& spec,
                             std::size_t target_length) {
  check_grid(spec.window_len, spec.hop);
  const std::size_t n_fft = spec.window_len;
  const std::size_t pad = n_fft / 2;
  const std::size_t padded = (spec.frames - 1) * spec.hop + n_fft;
  const auto window = hann_window(n_fft);
  const detail::Fft fft(n_fft);

  std::vector<double> acc(padded, 0.0);
  std::vector<std::complex<double>> buffer(n_fft);
  for (std::size_t m = 0; m < spec.frames; ++m) {
    auto row = spec.frame(m);
    // Hermitian extension; imaginary parts of DC and Nyquist are dropped.
    buffer[0] = {row[0].real(), 0.0};
    buffer[n_fft / 2] = {row[n_fft / 2].real(), 0.0};
    for (std::size_t k = 1; k < n_fft / 2; ++k) {
      buffer[k] = row[k];
      buffer[n_fft - k] = std::conj(row[k]);
    }
    fft.backward(buffer);
    for (std::size_t n = 0; n < n_fft; ++n)
      acc[m * spec.hop + n] +=
          window[n] * buffer[n].real() / static_cast<double>(n_fft);
  }

  const auto norm = window_power_sum(window, spec.frames, spec.hop, padded);
  std::vector<double> out(target_length, 0.0);
  for (std::size_t t = 0; t < target_length && t + pad < padded; ++t) {
    const double d = norm[t + pad];
    if (d <= 0.0) continue;  // beyond frame coverage: zero-padded output
    out[t] = acc[t + pad] / d;
  }
  return out;
}

std::vector<double> stft_adjoint(const Spectrogram& grad) {
  check_grid(grad.window_len, grad.hop);
  const std::size_t n_fft = grad.window_len;
  const std::size_t pad = n_fft / 2;
  const auto window = hann_window(n_fft);
  const detail::Fft fft(n_fft);

  std::vector<double> out(grad.signal_length, 0.0);
  std::vector<std::complex<double>> buffer(n_fft);
  for (std::size_t m = 0; m < grad.frames; ++m) {
    // dL/dx_n = w_n Re(sum_{k<=N/2} G_k e^{+i 2 pi k n / N})
    auto row = grad.frame(m);
    std::fill(buffer.begin(), buffer.end(), std::complex<double>{});
    for (std::size_t k = 0; k < grad.bins; ++k) buffer[k] = row[k];
    fft.backward(buffer);
    for (std::size_t n = 0; n < n_fft; ++n) {
      const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(m * grad.hop + n) -
                               static_cast<std::ptrdiff_t>(pad);
      if (t < 0 || t >= static_cast<std::ptrdiff_t>(out.size())) continue;
      out[static_cast<std::size_t>(t)] += window[n] * buffer[n].real();
    }
  }
  return out;
}

Spectrogram istft_ls_adjoint(std::span<const double> grad_output,
                             const Spectrogram& shape) {
  check_grid(shape.window_len, shape.hop);
  const std::size_t n_fft = shape.window_len;
  const std::size_t pad = n_fft / 2;
  const std::size_t padded = (shape.frames - 1) * shape.hop + n_fft;
  const auto window = hann_window(n_fft);
  const auto norm = window_power_sum(window, shape.frames, shape.hop, padded);
  const detail::Fft fft(n_fft);

  // Gradient with respect to the padded overlap-add accumulator.
  std::vector<double> g_acc(padded, 0.0);
  for (std::size_t t = 0; t < grad_output.size() && t + pad < padded; ++t) {
    const double d = norm[t + pad];
    if (d > 0.0) g_acc[t + pad] = grad_output[t] / d;
  }

  Spectrogram grad(shape.frames, shape.window_len, shape.hop,
                   shape.signal_length);
  std::vector<std::complex<double>> buffer(n_fft);
  const double inv_n = 1.0 / static_cast<double>(n_fft);
  for (std::size_t m = 0; m < shape.frames; ++m) {
    for (std::size_t n = 0; n < n_fft; ++n)
      buffer[n] = {window[n] * g_acc[m * shape.hop + n], 0.0};
    fft.forward(buffer);
    auto row = grad.frame(m);
    // Interior bins appear twice in the Hermitian extension.
    for (std::size_t k = 0; k < grad.bins; ++k) {
      const bool edge = (k == 0 || k == n_fft / 2);
      const std::complex<double> g = buffer[k] * (edge ? inv_n : 2.0 * inv_n);
      row[k] = edge ? std::complex<double>{g.real(), 0.0} : g;
    }
  }
  return grad;
}

}  // namespace percloss
