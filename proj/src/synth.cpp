#include "percloss/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "percloss/errors.hpp"
#include "percloss/signal.hpp"

namespace percloss {

namespace {

constexpr double kTargetRms = 0.05;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFs = static_cast<double>(kSampleRate);

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void normalize(std::vector<double>& x, double rms) {
  const double e = energy(x);
  if (e <= 0.0) return;
  const double g = rms / std::sqrt(e / static_cast<double>(x.size()));
  for (double& v : x) v *= g;
}

// Resonance gain of a formant at frequency f.
double formant(double f, double centre, double bandwidth) {
  const double z = (f - centre) / bandwidth;
  return std::exp(-0.5 * z * z);
}

// Two-pole resonator band-pass, unit peak gain.
void bandpass(std::vector<double>& x, double centre, double q) {
  const double w0 = kTwoPi * centre / kFs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0;
  const double a2 = (1.0 - alpha) / a0;
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    const double y = b0 * v - b0 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

void add_voiced(std::vector<double>& out, std::size_t start, std::size_t len,
                std::mt19937_64& rng) {
  const double f0 = uniform(rng, 100.0, 220.0);
  const double glide = uniform(rng, -0.15, 0.15);
  const double f1 = uniform(rng, 300.0, 800.0);
  const double f2 = uniform(rng, 900.0, 2300.0);
  const double f3 = uniform(rng, 2400.0, 3400.0);
  const double am_rate = uniform(rng, 3.0, 6.0);
  const double level = uniform(rng, 0.5, 1.0);
  const int harmonics = static_cast<int>(7000.0 / f0);
  std::vector<double> amp(harmonics + 1);
  std::vector<double> phase0(harmonics + 1);
  for (int h = 1; h <= harmonics; ++h) {
    const double f = h * f0;
    amp[h] = (formant(f, f1, 120.0) + 0.7 * formant(f, f2, 180.0) +
              0.4 * formant(f, f3, 250.0) + 0.02) /
             std::sqrt(static_cast<double>(h));
    phase0[h] = uniform(rng, 0.0, kTwoPi);
  }
  double phase = 0.0;
  for (std::size_t n = 0; n < len && start + n < out.size(); ++n) {
    const double t = static_cast<double>(n) / static_cast<double>(len);
    const double env = std::sin(std::numbers::pi * t);
    const double am = 0.75 + 0.25 * std::sin(kTwoPi * am_rate * n / kFs);
    phase += kTwoPi * f0 * (1.0 + glide * t) / kFs;
    double s = 0.0;
    for (int h = 1; h <= harmonics; ++h) s += amp[h] * std::sin(h * phase + phase0[h]);
    out[start + n] += level * env * env * am * s;
  }
}

void add_burst(std::vector<double>& out, std::size_t start, std::size_t len,
               std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double centre = uniform(rng, 2000.0, 6000.0);
  const double level = uniform(rng, 0.3, 0.8);
  std::vector<double> burst(len);
  for (double& v : burst) v = gauss(rng);
  bandpass(burst, centre, 2.0);
  for (std::size_t n = 0; n < len && start + n < out.size(); ++n) {
    const double env = std::sin(std::numbers::pi * static_cast<double>(n) /
                                static_cast<double>(len));
    out[start + n] += level * env * burst[n];
  }
}

}  // namespace

std::vector<double> clean_proxy(std::uint64_t seed, double duration_s) {
  std::mt19937_64 rng(seed);
  if (duration_s == 0.0) duration_s = uniform(rng, 2.0, 4.0);
  if (!(duration_s > 0.0) || !std::isfinite(duration_s))
    throw InvalidArgument("duration must be positive");
  const auto length = static_cast<std::size_t>(duration_s * kFs);
  std::vector<double> out(length, 0.0);

  // Leading and trailing pauses, then alternating syllables and gaps.
  std::size_t pos = static_cast<std::size_t>(uniform(rng, 0.05, 0.15) * kFs);
  const std::size_t tail = static_cast<std::size_t>(0.1 * kFs);
  while (pos + tail < length) {
    const bool burst = uniform(rng, 0.0, 1.0) < 0.25;
    const double dur = burst ? uniform(rng, 0.06, 0.14) : uniform(rng, 0.15, 0.32);
    const auto len = static_cast<std::size_t>(dur * kFs);
    if (burst)
      add_burst(out, pos, len, rng);
    else
      add_voiced(out, pos, len, rng);
    pos += len + static_cast<std::size_t>(uniform(rng, 0.02, 0.12) * kFs);
  }
  normalize(out, kTargetRms);

  std::normal_distribution<double> gauss(0.0, 1.0);
  const double floor = kTargetRms * 1e-3;  // -60 dB re speech level
  for (double& v : out) v += floor * gauss(rng);
  return out;
}

std::string_view noise_name(NoiseType type) {
  switch (type) {
    case NoiseType::White: return "white";
    case NoiseType::Pink: return "pink";
    case NoiseType::Babble: return "babble";
  }
  return "unknown";
}

std::optional<NoiseType> parse_noise_name(std::string_view name) {
  for (NoiseType t : kAllNoiseTypes)
    if (noise_name(t) == name) return t;
  return std::nullopt;
}

std::vector<double> make_noise(NoiseType type, std::size_t length, std::uint64_t seed) {
  if (length == 0) throw InvalidArgument("noise length must be positive");
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> out(length, 0.0);
  switch (type) {
    case NoiseType::White:
      for (double& v : out) v = gauss(rng);
      break;
    case NoiseType::Pink: {
      // Kellet's economy filter: -3 dB/octave within 0.5 dB above 10 Hz.
      double b0 = 0.0, b1 = 0.0, b2 = 0.0;
      for (double& v : out) {
        const double w = gauss(rng);
        b0 = 0.99765 * b0 + w * 0.0990460;
        b1 = 0.96300 * b1 + w * 0.2965164;
        b2 = 0.57000 * b2 + w * 1.0526913;
        v = b0 + b1 + b2 + w * 0.1848;
      }
      break;
    }
    case NoiseType::Babble: {
      const double seconds = static_cast<double>(length) / kFs + 0.5;
      for (int talker = 0; talker < 6; ++talker) {
        const auto voice = clean_proxy(rng(), seconds);
        const auto delay =
            static_cast<std::size_t>(uniform(rng, 0.0, 0.5) * kFs);
        for (std::size_t n = 0; n < length; ++n)
          out[n] += voice[(n + delay) % voice.size()];
      }
      break;
    }
  }
  normalize(out, kTargetRms);
  return out;
}

}  // namespace percloss
