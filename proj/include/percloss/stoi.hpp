#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "percloss/gradient.hpp"
#include "percloss/signal.hpp"

namespace percloss {

inline constexpr std::size_t kStoiBands = 15;
inline constexpr double kStoiLowestCenter = 150.0;
// 384 ms of 16 ms hops.
inline constexpr std::size_t kStoiSegment = 24;
// Clipping floor in dB: scaled noisy envelopes may exceed clean by 10^(-15/20).
inline constexpr double kStoiClipDb = 15.0;

// One-third-octave bands over the one-sided bins of the shared grid.
// Band j covers bins [low[j], high[j]).
struct OctaveBands {
  std::vector<std::size_t> low;
  std::vector<std::size_t> high;
  std::vector<double> centers;
  std::size_t count() const { return centers.size(); }
};

OctaveBands third_octave_bands(std::size_t window_len = kWindowLength,
                               Diagnostics* diag = nullptr);

// Frames x bands matrix of band envelopes.
struct EnvelopeMatrix {
  std::size_t frames = 0;
  std::size_t bands = 0;
  std::vector<double> values;
  double at(std::size_t m, std::size_t j) const { return values[m * bands + j]; }
  double& at(std::size_t m, std::size_t j) { return values[m * bands + j]; }
};

// sqrt(sum over the band's bins of |X|^2), per frame and band.
EnvelopeMatrix octave_decompose(const Spectrogram& spec, const OctaveBands& bands);

// Mean-removed normalized correlation of two equal-length vectors,
// epsilon-stabilized in the denominator.
double segment_correlation(std::span<const double> a, std::span<const double> b);

struct SegmentScore {
  double d = 0.0;
  bool silent_clean = false;
};

// Correlation of the segment ending at frame m (frames m-N+1..m) of band j,
// after scaling the noisy segment to the clean norm and clipping it.
SegmentScore stoi_segment(const EnvelopeMatrix& clean, const EnvelopeMatrix& noisy,
                          std::size_t m, std::size_t j,
                          std::size_t segment = kStoiSegment);

struct StoiBreakdown {
  std::size_t frames = 0;  // valid segment ends, m >= N-1
  std::size_t bands = 0;
  std::vector<double> d_matrix;  // frames x bands
  std::size_t silent_segments = 0;
  double value = 1.0;
};

// Every segment score of an envelope pair and their mean.
StoiBreakdown stoi_breakdown(const EnvelopeMatrix& clean, const EnvelopeMatrix& noisy);

// Throws InvalidArgument when the signal is too short for one segment.
StoiBreakdown loss_stoi(std::span<const double> clean, std::span<const double> estimate);

// Mini-batch form: mean over every (utterance, frame, band) entry.
double stoi_average(std::span<const StoiBreakdown> utterances);

class StoiObjective final : public Objective {
 public:
  explicit StoiObjective(std::vector<double> clean);
  std::string name() const override { return "stoi"; }
  std::size_t input_length() const override { return length_; }
  Evaluation evaluate(std::span<const double> estimate,
                      bool want_gradient) const override;

 private:
  std::size_t length_;
  OctaveBands bands_;
  EnvelopeMatrix clean_env_;
};

}  // namespace percloss
