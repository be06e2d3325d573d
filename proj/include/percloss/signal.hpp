#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace percloss {

inline constexpr int kSampleRate = 16000;
// Shared analysis grid for every loss: 32 ms periodic Hann, 50% overlap.
inline constexpr std::size_t kWindowLength = 512;
inline constexpr std::size_t kHop = 256;

// Mono waveform. Loaders guarantee sample_rate == 16000 and finite samples.
struct Signal {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  std::span<const double> view() const { return samples; }
};

// One-sided STFT, frames x bins, row-major. `signal_length` is the length of
// the unpadded signal the spectrogram was computed from.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t window_len = kWindowLength;
  std::size_t hop = kHop;
  std::size_t signal_length = 0;
  std::vector<std::complex<double>> values;

  Spectrogram() = default;
  Spectrogram(std::size_t frames, std::size_t window_len, std::size_t hop,
              std::size_t signal_length);

  std::complex<double>& at(std::size_t m, std::size_t k) {
    return values[m * bins + k];
  }
  const std::complex<double>& at(std::size_t m, std::size_t k) const {
    return values[m * bins + k];
  }
  std::span<std::complex<double>> frame(std::size_t m) {
    return {values.data() + m * bins, bins};
  }
  std::span<const std::complex<double>> frame(std::size_t m) const {
    return {values.data() + m * bins, bins};
  }
};

// Non-fatal notes raised while loading or writing audio.
struct Diagnostics {
  std::vector<std::string> warnings;
};

// Reads a RIFF/WAVE file (PCM-16 or IEEE float-32). Multichannel files yield
// channel 0 and a warning. Throws FormatError on anything else, including a
// sample rate other than 16 kHz.
Signal load_wav(const std::filesystem::path& path,
                Diagnostics* diagnostics = nullptr);

// Float-32 writer. Samples outside [-1, 1] are written unclipped and noted.
void save_wav_float(const std::filesystem::path& path, const Signal& signal,
                    Diagnostics* diagnostics = nullptr);

// PCM-16 writer, rounds to the nearest step of 1/32768 and saturates.
void save_wav_pcm16(const std::filesystem::path& path, const Signal& signal);

// Periodic Hann window of the given length.
std::vector<double> hann_window(std::size_t length);

// The signal is zero-padded by window_len/2 on both sides, so
// frames = 1 + floor(length / hop). Requires hop == window_len / 2 and
// length >= window_len.
Spectrogram stft(std::span<const double> signal,
                 std::size_t window_len = kWindowLength,
                 std::size_t hop = kHop);

// Least-squares signal estimate from a possibly inconsistent STFT
// (one synthesis pass of Griffin & Lim): windowed overlap-add of the frame
// inverses divided by the summed squared window. The analysis pad is
// removed and the result truncated or zero-padded to target_length.
std::vector<double> istft_ls(const Spectrogram& spec, std::size_t target_length);

// Adjoint of stft(). `grad` holds dL/dRe(X) + i dL/dIm(X) per bin; the result
// is dL/dx for the signal the spectrogram shape describes.
std::vector<double> stft_adjoint(const Spectrogram& grad);

// Adjoint of istft_ls(). Maps dL/dy (length target_length) to
// dL/dRe(X) + i dL/dIm(X) on a spectrogram shaped like `shape`.
Spectrogram istft_ls_adjoint(std::span<const double> grad_output,
                             const Spectrogram& shape);

struct Mixture {
  std::vector<double> noisy;
  std::vector<double> scaled_noise;
  double noise_gain = 0.0;
};

// Scales `noise` so that 10 log10(|clean|^2 / |scaled|^2) == snr_db and adds
// it to `clean`.
Mixture mix_at_snr(std::span<const double> clean, std::span<const double> noise,
                   double snr_db);

double energy(std::span<const double> x);

}  // namespace percloss
