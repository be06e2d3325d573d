#pragma once

#include <span>
#include <utility>
#include <vector>

#include "percloss/gradient.hpp"

namespace percloss {

// SI-SDR values are clamped to +-120 dB so perfect reconstruction stays finite.
inline constexpr double kSdrCapDb = 120.0;

// Projection of an estimate onto the clean and noise references.
// target + noise_part + artifact == estimate.
struct SdrDecomposition {
  std::vector<double> target;
  std::vector<double> noise_part;
  std::vector<double> artifact;
  double alpha = 0.0;  // clean^T estimate / |clean|^2
};

SdrDecomposition decompose(std::span<const double> clean,
                           std::span<const double> noise,
                           std::span<const double> estimate);

struct SdrValue {
  double db = 0.0;
  bool clamped = false;
};

// 10 log10(|a x|^2 / (|a x - x_hat|^2 + eps)) with a = x^T x_hat / |x|^2,
// clamped to [-120, 120] dB.
SdrValue si_sdr(std::span<const double> clean, std::span<const double> estimate);

using SignalPair = std::pair<std::span<const double>, std::span<const double>>;

// Mini-batch mean of si_sdr over (clean, estimate) pairs. Objective to maximize.
double loss_sdr(std::span<const SignalPair> batch);

class SdrObjective final : public Objective {
 public:
  explicit SdrObjective(std::vector<double> clean);
  std::string name() const override { return "sdr"; }
  std::size_t input_length() const override { return clean_.size(); }
  Evaluation evaluate(std::span<const double> estimate,
                      bool want_gradient) const override;

 private:
  std::vector<double> clean_;
  double clean_energy_;
};

}  // namespace percloss
