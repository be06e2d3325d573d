#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "percloss/gradient.hpp"
#include "percloss/signal.hpp"

namespace percloss {

inline constexpr std::size_t kBarkBands = 49;
// Level alignment target for the mean 300 Hz - 3 kHz band power.
inline constexpr double kPesqTargetPower = 1e7;
// Stabilizer of the frequency-response compensation ratio.
inline constexpr double kEqualizeConstant = 1000.0;
// Per-frame gain compensation limits.
inline constexpr double kMinFrameGain = 3e-4;
inline constexpr double kMaxFrameGain = 5.0;
inline constexpr std::size_t kPsqmWindow = 20;
inline constexpr std::size_t kPsqmHop = 10;
inline constexpr double kPesqCeiling = 4.5;

using BarkFrame = std::array<double, kBarkBands>;

// Constant psychoacoustic tables, already expressed in the units of
// bark_spectrum() on the 512-point grid.
struct PesqTables {
  std::array<std::size_t, kBarkBands + 1> band_edges{};  // start bins, I_i
  BarkFrame silence_clean{};                             // S_c thresholds
  BarkFrame silence_noisy{};                             // S_n thresholds
  BarkFrame band_weight{};                               // w_i
  BarkFrame hearing_threshold{};                         // P_0,i
  BarkFrame loudness_scale{};                            // S_i
  double zwicker_power = 0.23;
  int version = 0;
  std::string revision;

  // Parses the checksummed text format; throws FormatError on a malformed
  // file or checksum mismatch.
  static PesqTables parse(std::string_view text);
  static PesqTables load(const std::filesystem::path& path);
  // The table file compiled into the library.
  static const PesqTables& builtin();
  static std::string_view builtin_text();
};

std::uint64_t fnv1a64(std::string_view bytes);

// Mean over frames of the summed |X|^2 of bins centred in [300, 3000] Hz.
double band_power_300_3000(const Spectrogram& spec);

// Global gain that brings band_power_300_3000 to 1e7.
double level_alignment_gain(std::span<const double> signal);
std::vector<double> level_align(std::span<const double> signal);

// Per-frame mean of |X|^2 over bins [I_i, I_i+1).
std::vector<BarkFrame> bark_spectrum(const Spectrogram& spec,
                                     const PesqTables& tables);

struct Equalized {
  std::vector<BarkFrame> clean;
  std::vector<BarkFrame> noisy;
  BarkFrame band_ratio{};          // (P_n,i + c1) / (P_c,i + c1)
  std::vector<double> frame_gain;  // clamped per-frame gain of the noisy path
};

// Frequency-response compensation of the clean path and per-frame gain
// compensation of the noisy path.
Equalized tf_equalize(std::span<const BarkFrame> clean,
                      std::span<const BarkFrame> noisy,
                      const PesqTables& tables);

// Zwicker-law loudness density of one band; zero at or below threshold.
double loudness_density(double power, std::size_t band, const PesqTables& tables);
std::vector<BarkFrame> loudness(std::span<const BarkFrame> power,
                                const PesqTables& tables);

// Dead-zoned loudness difference, clean minus noisy.
double disturbance_density(double clean_loudness, double noisy_loudness);
std::vector<BarkFrame> disturbance(std::span<const BarkFrame> clean_loudness,
                                   std::span<const BarkFrame> noisy_loudness);

// Asymmetry factor ((B_n + 50) / (B_c + 50))^1.2, 12 above 12, 0 below 3.
double asymmetry_factor(double clean_power, double noisy_power);

struct FrameDisturbances {
  std::vector<double> symmetric;   // FD_m
  std::vector<double> asymmetric;  // AFD_m
};

FrameDisturbances frame_disturbances(std::span<const BarkFrame> disturbance,
                                     std::span<const BarkFrame> clean_bark,
                                     std::span<const BarkFrame> noisy_bark,
                                     const PesqTables& tables);

struct PesqBreakdown {
  double d_sym = 0.0;
  double d_asym = 0.0;
  std::vector<double> fd_per_frame;
  std::vector<double> afd_per_frame;
  double value = kPesqCeiling;  // 4.5 - 0.1 d_sym - 0.0309 d_asym
};

// Two-stage averaging: 20-frame L6 windows every 10 frames (incomplete
// windows dropped), then an L2 mean over windows. Needs at least 20 frames.
double psqm_average(std::span<const double> frame_disturbance);
PesqBreakdown aggregate(std::span<const double> fd, std::span<const double> afd);

// Mini-batch form: d_sym and d_asym are averaged over utterances before the
// affine map.
double aggregate_batch(std::span<const PesqBreakdown> utterances);

// Full chain for a time-aligned pair. Both signals are level-aligned
// independently.
PesqBreakdown loss_pesq(std::span<const double> clean,
                        std::span<const double> estimate,
                        const PesqTables& tables = PesqTables::builtin());

class PesqObjective final : public Objective {
 public:
  PesqObjective(std::vector<double> clean,
                const PesqTables& tables = PesqTables::builtin());
  ~PesqObjective() override;
  std::string name() const override { return "pesq"; }
  std::size_t input_length() const override { return length_; }
  Evaluation evaluate(std::span<const double> estimate,
                      bool want_gradient) const override;

 private:
  struct CleanSide;
  PesqTables tables_;
  std::size_t length_;
  std::unique_ptr<const CleanSide> clean_;
};

}  // namespace percloss
