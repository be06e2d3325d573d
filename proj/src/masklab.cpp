#include "percloss/masklab.hpp"

#include <algorithm>
#include <cmath>

#include "percloss/errors.hpp"
#include "percloss/pesq.hpp"
#include "percloss/sdr.hpp"
#include "percloss/stoi.hpp"

namespace percloss {

namespace {

void check_aligned(const Spectrogram& a, const Spectrogram& b) {
  if (a.frames != b.frames || a.bins != b.bins)
    throw InvalidArgument("spectrograms are not aligned");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Spectrogram masked(const Spectrogram& noisy, const Mask& mask) {
  if (mask.frames != noisy.frames || mask.bins != noisy.bins)
    throw InvalidArgument("mask shape differs from the spectrogram");
  Spectrogram out = noisy;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= mask.values[i];
  return out;
}

struct Probe {
  Evaluation eval;
  std::vector<double> signal;
};

Probe probe(const Objective& objective, const Spectrogram& noisy,
            const MaskParams& params) {
  Probe p;
  p.signal = apply_mask(noisy, params.mask());
  p.eval = objective.evaluate(p.signal, true);
  require_finite(p.eval.value, "refine/objective");
  require_finite(p.eval.gradient, "refine/gradient");
  return p;
}

// d objective / d theta via the mask chain rule.
std::vector<double> theta_gradient(const Spectrogram& noisy, const MaskParams& params,
                                   std::span<const double> signal_gradient) {
  const Spectrogram g_spec = istft_ls_adjoint(signal_gradient, noisy);
  std::vector<double> g(params.theta.values.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& y = noisy.values[i];
    const auto& gs = g_spec.values[i];
    const double g_mask = gs.real() * y.real() + gs.imag() * y.imag();
    const double s = sigmoid(params.theta.values[i]);
    g[i] = g_mask * params.mask_cap * s * (1.0 - s);
  }
  require_finite(g, "refine/theta_gradient");
  return g;
}

RefineStep metrics(std::span<const double> clean, std::span<const double> estimate,
                   double objective, const PesqTables& tables) {
  RefineStep s;
  s.objective = objective;
  s.si_sdr_db = si_sdr(clean, estimate).db;
  s.pesq_loss = loss_pesq(clean, estimate, tables).value;
  s.stoi_loss = loss_stoi(clean, estimate).value;
  return s;
}

}  // namespace

Mask oracle_iam(const Spectrogram& clean, const Spectrogram& noisy, double cap) {
  check_aligned(clean, noisy);
  Mask m(clean.frames, clean.bins);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const double r = std::abs(clean.values[i]) / (std::abs(noisy.values[i]) + kEps);
    m.values[i] = std::clamp(r, 0.0, cap);
  }
  return m;
}

Mask oracle_psm(const Spectrogram& clean, const Spectrogram& noisy) {
  check_aligned(clean, noisy);
  Mask m(clean.frames, clean.bins);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    const auto& x = clean.values[i];
    const auto& y = noisy.values[i];
    const double ax = std::abs(x);
    const double ay = std::abs(y);
    // cos(angle X - angle Y) = Re(X conj Y) / (|X| |Y|); taken as 1 when
    // either phase is undefined.
    const double c = (ax > 0.0 && ay > 0.0) ? (x * std::conj(y)).real() / (ax * ay) : 1.0;
    m.values[i] = std::clamp(ax / (ay + kEps) * c, 0.0, 1.0);
  }
  return m;
}

std::vector<double> apply_mask(const Spectrogram& noisy, const Mask& mask) {
  return istft_ls(masked(noisy, mask), noisy.signal_length);
}

Mask MaskParams::mask() const {
  Mask m(theta.frames, theta.bins);
  for (std::size_t i = 0; i < m.values.size(); ++i)
    m.values[i] = mask_cap * sigmoid(theta.values[i]);
  return m;
}

RefineResult refine_mixture(std::span<const double> clean,
                            std::span<const double> noisy,
                            const RefineOptions& options, const PesqTables& tables) {
  if (clean.size() != noisy.size())
    throw InvalidArgument("clean and noisy lengths differ");
  if (!(options.step_size > 0.0) || !std::isfinite(options.step_size))
    throw InvalidArgument("step size must be positive");
  const auto objective = make_objective(
      options.loss, std::vector<double>(clean.begin(), clean.end()), options.weights,
      tables);

  const Spectrogram y = stft(noisy);
  RefineResult result;
  result.params.theta = Mask(y.frames, y.bins, 0.0);
  Probe current = probe(*objective, y, result.params);
  std::vector<double> grad = theta_gradient(y, result.params, current.eval.gradient);

  double eta = options.step_size;
  RefineStep first = metrics(clean, current.signal, current.eval.value, tables);
  first.step_size = eta;
  result.trace.steps.push_back(first);

  MaskParams proposal = result.params;
  for (std::size_t t = 1; t <= options.steps; ++t) {
    double g_max = 0.0;
    for (double g : grad) g_max = std::max(g_max, std::abs(g));
    RefineStep step = result.trace.steps.back();
    step.step = t;
    if (g_max == 0.0) {
      // Stationary point: nothing left to ascend.
      step.accepted = false;
      result.trace.steps.push_back(step);
      continue;
    }
    for (std::size_t i = 0; i < grad.size(); ++i)
      proposal.theta.values[i] = result.params.theta.values[i] + eta * grad[i] / g_max;
    Probe next = probe(*objective, y, proposal);
    if (next.eval.value >= current.eval.value) {
      result.params.theta.values.swap(proposal.theta.values);
      proposal.theta.values = result.params.theta.values;
      current = std::move(next);
      grad = theta_gradient(y, result.params, current.eval.gradient);
      eta *= 1.1;
      step = metrics(clean, current.signal, current.eval.value, tables);
      step.step = t;
      step.accepted = true;
    } else {
      eta *= 0.5;
      step.accepted = false;
    }
    step.step_size = eta;
    result.trace.steps.push_back(step);
  }
  result.denoised = std::move(current.signal);
  return result;
}

RefineResult refine(std::span<const double> clean, std::span<const double> noise,
                    double snr_db, const RefineOptions& options,
                    const PesqTables& tables) {
  const Mixture mix = mix_at_snr(clean, noise, snr_db);
  return refine_mixture(clean, mix.noisy, options, tables);
}

}  // namespace percloss
