#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "percloss/multitask.hpp"
#include "percloss/signal.hpp"

namespace percloss {

// Upper clip of the amplitude mask and of the refiner's squashed mask.
inline constexpr double kMaskCap = 2.0;

// Real-valued frames x bins mask on the shared grid.
struct Mask {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> values;

  Mask() = default;
  Mask(std::size_t frames, std::size_t bins, double fill = 0.0)
      : frames(frames), bins(bins), values(frames * bins, fill) {}
  double at(std::size_t m, std::size_t k) const { return values[m * bins + k]; }
  double& at(std::size_t m, std::size_t k) { return values[m * bins + k]; }
};

// |X| / (|Y| + eps), clipped to [0, cap].
Mask oracle_iam(const Spectrogram& clean, const Spectrogram& noisy,
                double cap = kMaskCap);
// |X| / (|Y| + eps) cos(angle X - angle Y), clipped to [0, 1].
Mask oracle_psm(const Spectrogram& clean, const Spectrogram& noisy);

// istft_ls(mask * Y), keeping the noisy phase; length noisy.signal_length.
std::vector<double> apply_mask(const Spectrogram& noisy, const Mask& mask);

// mask = cap * sigmoid(theta); theta == 0 gives mask 1 for cap 2.
struct MaskParams {
  Mask theta;
  double mask_cap = kMaskCap;
  Mask mask() const;
};

struct RefineStep {
  std::size_t step = 0;
  double objective = 0.0;
  double si_sdr_db = 0.0;
  double pesq_loss = 0.0;
  double stoi_loss = 0.0;
  double step_size = 0.0;  // step size for the next proposal
  bool accepted = true;
};

// Entry 0 holds the metrics of the initial (identity) mask; entry t the state
// after t ascent steps.
struct RefineTrace {
  std::vector<RefineStep> steps;
};

struct RefineOptions {
  LossKind loss = LossKind::Sdr;
  CombinationWeights weights{};
  std::size_t steps = 300;
  // Largest per-step change of theta; the ascent direction is the gradient
  // scaled by its max-norm.
  double step_size = 0.5;
};

struct RefineResult {
  std::vector<double> denoised;
  RefineTrace trace;
  MaskParams params;
};

// Gradient ascent on theta through apply_mask -> istft_ls -> objective.
// A proposal that lowers the objective is rejected and the step halved;
// an accepted one grows the step by 1.1.
RefineResult refine_mixture(std::span<const double> clean,
                            std::span<const double> noisy,
                            const RefineOptions& options,
                            const PesqTables& tables = PesqTables::builtin());

RefineResult refine(std::span<const double> clean, std::span<const double> noise,
                    double snr_db, const RefineOptions& options,
                    const PesqTables& tables = PesqTables::builtin());

}  // namespace percloss
