#include <cmath>

#include "accumulate.hpp"
#include "percloss/errors.hpp"
#include "percloss/signal.hpp"

namespace percloss {

double energy(std::span<const double> x) {
  detail::Accumulator e;
  for (double v : x) e += v * v;
  return e.value();
}

Mixture mix_at_snr(std::span<const double> clean, std::span<const double> noise,
                   double snr_db) {
  if (clean.size() != noise.size())
    throw InvalidArgument("clean and noise lengths differ");
  if (!std::isfinite(snr_db)) throw InvalidArgument("SNR must be finite");
  const double clean_energy = energy(clean);
  const double noise_energy = energy(noise);
  if (clean_energy <= 0.0) throw InvalidArgument("clean signal has zero energy");
  if (noise_energy <= 0.0) throw InvalidArgument("noise signal has zero energy");

  Mixture mix;
  mix.noise_gain =
      std::sqrt(clean_energy / (noise_energy * std::pow(10.0, snr_db / 10.0)));
  mix.scaled_noise.resize(noise.size());
  mix.noisy.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    mix.scaled_noise[i] = mix.noise_gain * noise[i];
    mix.noisy[i] = clean[i] + mix.scaled_noise[i];
  }
  return mix;
}

}  // namespace percloss
