#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "percloss/errors.hpp"
#include "percloss/signal.hpp"
#include "percloss/synth.hpp"

using namespace percloss;

namespace {

double rms(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return std::sqrt(e / double(x.size()));
}

// Fraction of energy below `hz` from a direct periodogram of the first 4096 samples.
double low_fraction(const std::vector<double>& x, double hz) {
  const std::size_t n = 4096;
  double low = 0.0, total = 0.0;
  for (std::size_t k = 1; k < n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = -2.0 * std::numbers::pi * double(k * t % n) / double(n);
      re += x[t] * std::cos(a);
      im += x[t] * std::sin(a);
    }
    const double p = re * re + im * im;
    total += p;
    if (double(k) * 16000.0 / double(n) < hz) low += p;
  }
  return low / total;
}

}  // namespace

TEST_CASE("clean proxy is deterministic and normalized") {
  const auto a = clean_proxy(11);
  const auto b = clean_proxy(11);
  CHECK(a == b);
  CHECK(a != clean_proxy(12));
  CHECK(a.size() >= 32000);
  CHECK(a.size() <= 64000);
  // The -60 dB floor is added after normalization.
  CHECK(rms(a) == doctest::Approx(0.05).epsilon(1e-5));
  CHECK(clean_proxy(3, 1.25).size() == 20000);
  CHECK_THROWS_AS(clean_proxy(3, -1.0), InvalidArgument);
}

TEST_CASE("clean proxy lengths vary with the seed") {
  std::size_t lo = 1000000, hi = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto n = clean_proxy(s).size();
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  CHECK(hi > lo);
}

TEST_CASE("clean proxy has syllabic energy variation") {
  const auto x = clean_proxy(2, 2.0);
  std::vector<double> frame_energy;
  for (std::size_t m = 0; m + 256 <= x.size(); m += 256) {
    double e = 0.0;
    for (std::size_t i = m; i < m + 256; ++i) e += x[i] * x[i];
    frame_energy.push_back(e);
  }
  const auto [mn, mx] = std::minmax_element(frame_energy.begin(), frame_energy.end());
  CHECK(*mx > 100.0 * *mn);
}

TEST_CASE("noise generators") {
  for (NoiseType t : kAllNoiseTypes) {
    CAPTURE(noise_name(t));
    const auto a = make_noise(t, 8000, 5);
    CHECK(a.size() == 8000);
    CHECK(a == make_noise(t, 8000, 5));
    CHECK(a != make_noise(t, 8000, 6));
    CHECK(energy(a) > 0.0);
    CHECK(parse_noise_name(noise_name(t)) == t);
  }
  CHECK_FALSE(parse_noise_name("brown").has_value());
  CHECK_THROWS_AS(make_noise(NoiseType::White, 0, 1), InvalidArgument);
  // Pink noise concentrates more energy at low frequencies than white.
  CHECK(low_fraction(make_noise(NoiseType::Pink, 4096, 1), 1000.0) >
        2.0 * low_fraction(make_noise(NoiseType::White, 4096, 1), 1000.0));
}
