#include "percloss/sdr.hpp"

#include <cmath>
#include <numbers>

#include "accumulate.hpp"
#include "percloss/errors.hpp"
#include "percloss/signal.hpp"

namespace percloss {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  detail::Accumulator s;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s.value();
}

void check_pair(std::span<const double> clean, std::span<const double> estimate) {
  if (clean.size() != estimate.size())
    throw InvalidArgument("clean and estimate lengths differ");
  if (clean.empty()) throw InvalidArgument("empty signal");
}

struct SdrTerms {
  double alpha;
  double target_energy;  // |a x|^2
  double error_energy;   // |a x - x_hat|^2
  SdrValue value;
};

SdrTerms sdr_terms(std::span<const double> clean, double clean_energy,
                   std::span<const double> estimate) {
  SdrTerms t{};
  t.alpha = dot(clean, estimate) / clean_energy;
  detail::Accumulator target_energy;
  detail::Accumulator error_energy;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double target = t.alpha * clean[i];
    const double err = target - estimate[i];
    target_energy += target * target;
    error_energy += err * err;
  }
  t.target_energy = target_energy.value();
  t.error_energy = error_energy.value();
  const double db = 10.0 * std::log10(t.target_energy / (t.error_energy + kEps));
  // log10(0) = -inf when the estimate is orthogonal to the clean signal.
  if (!(db < kSdrCapDb)) {
    t.value = {kSdrCapDb, true};
  } else if (!(db > -kSdrCapDb)) {
    t.value = {-kSdrCapDb, true};
  } else {
    t.value = {db, false};
  }
  return t;
}

}  // namespace

SdrDecomposition decompose(std::span<const double> clean,
                           std::span<const double> noise,
                           std::span<const double> estimate) {
  check_pair(clean, estimate);
  if (noise.size() != clean.size())
    throw InvalidArgument("noise and clean lengths differ");
  const double ce = energy(clean);
  const double ne = energy(noise);
  if (ce <= 0.0) throw InvalidArgument("clean signal has zero energy");
  if (ne <= 0.0) throw InvalidArgument("noise signal has zero energy");

  SdrDecomposition d;
  d.alpha = dot(clean, estimate) / ce;
  const double beta = dot(noise, estimate) / ne;
  const std::size_t n = clean.size();
  d.target.resize(n);
  d.noise_part.resize(n);
  d.artifact.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.target[i] = d.alpha * clean[i];
    d.noise_part[i] = beta * noise[i];
    d.artifact[i] = estimate[i] - d.target[i] - d.noise_part[i];
  }
  return d;
}

SdrValue si_sdr(std::span<const double> clean, std::span<const double> estimate) {
  check_pair(clean, estimate);
  const double ce = energy(clean);
  if (ce <= 0.0) throw InvalidArgument("clean signal has zero energy");
  return sdr_terms(clean, ce, estimate).value;
}

double loss_sdr(std::span<const SignalPair> batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  double sum = 0.0;
  for (const auto& [clean, estimate] : batch) sum += si_sdr(clean, estimate).db;
  return sum / static_cast<double>(batch.size());
}

SdrObjective::SdrObjective(std::vector<double> clean)
    : clean_(std::move(clean)), clean_energy_(energy(clean_)) {
  if (clean_energy_ <= 0.0) throw InvalidArgument("clean signal has zero energy");
}

Evaluation SdrObjective::evaluate(std::span<const double> estimate,
                                  bool want_gradient) const {
  check_pair(clean_, estimate);
  const SdrTerms t = sdr_terms(clean_, clean_energy_, estimate);
  Evaluation eval;
  eval.value = t.value.db;
  BranchTrace trace;
  trace.record(t.value.clamped);
  eval.branches = trace.digest();
  if (!want_gradient) return eval;

  eval.gradient.assign(estimate.size(), 0.0);
  if (t.value.clamped) return eval;
  // d/dx_hat of 10 log10(A / (B + eps)):
  //   dA = 2 a x, dB = 2 (x_hat - a x)
  const double k = 10.0 / std::numbers::ln10;
  const double ga = k * 2.0 * t.alpha / t.target_energy;
  const double gb = k * 2.0 / (t.error_energy + kEps);
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double residual = estimate[i] - t.alpha * clean_[i];
    eval.gradient[i] = ga * clean_[i] - gb * residual;
  }
  return eval;
}

}  // namespace percloss
