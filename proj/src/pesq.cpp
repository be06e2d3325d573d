#include "percloss/pesq.hpp"

#include <algorithm>
#include <cmath>

#include "accumulate.hpp"
#include "percloss/errors.hpp"

namespace percloss {

namespace {

constexpr double kAsymmetryOffset = 50.0;
constexpr double kAsymmetryPower = 1.2;
constexpr double kAsymmetryMax = 12.0;
constexpr double kAsymmetryMin = 3.0;
constexpr double kDeadZone = 0.25;
constexpr double kGainSmoothing = 0.2;  // weight of the previous frame's gain
constexpr double kSymWeight = 0.1;
constexpr double kAsymWeight = 0.0309;

struct BandRange {
  std::size_t first;
  std::size_t last;  // inclusive
};

// Bins whose centre frequency lies in [300, 3000] Hz.
BandRange level_bins(std::size_t window_len) {
  const double bin_hz = static_cast<double>(kSampleRate) /
                        static_cast<double>(window_len);
  return {static_cast<std::size_t>(std::ceil(300.0 / bin_hz)),
          static_cast<std::size_t>(std::floor(3000.0 / bin_hz))};
}

void check_grid(const Spectrogram& spec) {
  if (spec.window_len != kWindowLength || spec.hop != kHop)
    throw InvalidArgument("PESQ stages need the 512/256 analysis grid");
}

double alignment_gain_squared(double band_power) {
  return kPesqTargetPower / (band_power + kEps);
}

// Forward intermediates of the equalization stage.
struct EqualizeTrace {
  BarkFrame clean_avg{};
  BarkFrame noisy_avg{};
  BarkFrame ratio{};
  std::vector<BarkFrame> clean_eq;
  std::vector<BarkFrame> noisy_eq;
  std::vector<double> audible_clean;
  std::vector<double> audible_noisy;
  std::vector<double> raw_gain;
  std::vector<double> smoothed_gain;
  std::vector<double> gain;
};

EqualizeTrace equalize(std::span<const BarkFrame> clean,
                       std::span<const BarkFrame> noisy,
                       const PesqTables& tables, BranchTrace* branches) {
  if (clean.size() != noisy.size())
    throw InvalidArgument("clean and noisy Bark spectra differ in frame count");
  const std::size_t frames = clean.size();
  if (frames == 0) throw InvalidArgument("empty Bark spectrum");
  const double inv_frames = 1.0 / static_cast<double>(frames);

  EqualizeTrace t;
  std::array<detail::Accumulator, kBarkBands> clean_sum;
  std::array<detail::Accumulator, kBarkBands> noisy_sum;
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t i = 0; i < kBarkBands; ++i) {
      const bool clean_active = clean[m][i] > tables.silence_clean[i];
      const bool noisy_active = noisy[m][i] > tables.silence_noisy[i];
      if (branches) {
        branches->record(clean_active);
        branches->record(noisy_active);
      }
      if (clean_active) clean_sum[i] += clean[m][i];
      if (noisy_active) noisy_sum[i] += noisy[m][i];
    }
  }
  for (std::size_t i = 0; i < kBarkBands; ++i) {
    t.clean_avg[i] = clean_sum[i].value() * inv_frames;
    t.noisy_avg[i] = noisy_sum[i].value() * inv_frames;
    t.ratio[i] = (t.noisy_avg[i] + kEqualizeConstant) /
                 (t.clean_avg[i] + kEqualizeConstant);
  }

  t.clean_eq.resize(frames);
  t.noisy_eq.resize(frames);
  t.audible_clean.resize(frames);
  t.audible_noisy.resize(frames);
  t.raw_gain.resize(frames);
  t.smoothed_gain.resize(frames);
  t.gain.resize(frames);
  for (std::size_t m = 0; m < frames; ++m) {
    double audible_c = 0.0;
    double audible_n = 0.0;
    for (std::size_t i = 0; i < kBarkBands; ++i) {
      t.clean_eq[m][i] = t.ratio[i] * clean[m][i];
      if (i == 0) continue;  // band 0 is excluded from the audible power
      const bool c_audible = t.clean_eq[m][i] > tables.hearing_threshold[i];
      const bool n_audible = noisy[m][i] > tables.hearing_threshold[i];
      if (branches) {
        branches->record(c_audible);
        branches->record(n_audible);
      }
      if (c_audible) audible_c += t.clean_eq[m][i];
      if (n_audible) audible_n += noisy[m][i];
    }
    t.audible_clean[m] = audible_c;
    t.audible_noisy[m] = audible_n;
    t.raw_gain[m] = (audible_c + kEqualizeConstant) / (audible_n + kEqualizeConstant);
    t.smoothed_gain[m] =
        m == 0 ? t.raw_gain[m]
               : kGainSmoothing * t.smoothed_gain[m - 1] +
                     (1.0 - kGainSmoothing) * t.raw_gain[m];
    const double s = t.smoothed_gain[m];
    unsigned state = 0;
    if (s > kMaxFrameGain) {
      state = 1;
      t.gain[m] = kMaxFrameGain;
    } else if (s < kMinFrameGain) {
      state = 2;
      t.gain[m] = kMinFrameGain;
    } else {
      t.gain[m] = s;
    }
    if (branches) branches->record_choice(state);
    for (std::size_t i = 0; i < kBarkBands; ++i)
      t.noisy_eq[m][i] = t.gain[m] * noisy[m][i];
  }
  return t;
}

struct LoudnessSlope {
  double value;
  double slope;  // d value / d power
};

LoudnessSlope loudness_with_slope(double power, std::size_t band,
                                  const PesqTables& tables) {
  const double p0 = tables.hearing_threshold[band];
  if (!(power > p0)) return {0.0, 0.0};
  const double g = tables.zwicker_power;
  const double scale = tables.loudness_scale[band] * std::pow(p0 / 0.5, g);
  const double inner = 0.5 + 0.5 * power / p0;
  return {scale * (std::pow(inner, g) - 1.0),
          scale * g * std::pow(inner, g - 1.0) * 0.5 / p0};
}

// Dead-zone branch: 0 inside the zone, 1 above it, 2 below it. `noisy_min`
// tells whether min(L_c, L_n) picked the noisy loudness (ties go to clean).
struct DeadZone {
  double value;
  unsigned branch;
  bool noisy_min;
};

DeadZone dead_zone(double lc, double ln) {
  const bool noisy_min = ln < lc;
  const double zone = kDeadZone * (noisy_min ? ln : lc);
  const double diff = lc - ln;
  // max(diff - zone, 0) + min(diff + zone, 0); zone >= 0 makes the two
  // terms mutually exclusive.
  if (diff - zone > 0.0) return {diff - zone, 1, noisy_min};
  if (diff + zone < 0.0) return {diff + zone, 2, noisy_min};
  return {0.0, 0, noisy_min};
}

struct Asymmetry {
  double value;
  unsigned branch;  // 0 pass-through, 1 capped at 12, 2 zeroed below 3
  double ratio;
};

Asymmetry asymmetry(double clean_power, double noisy_power) {
  const double ratio =
      (noisy_power + kAsymmetryOffset) / (clean_power + kAsymmetryOffset);
  const double h = std::pow(ratio, kAsymmetryPower);
  if (h > kAsymmetryMax) return {kAsymmetryMax, 1, ratio};
  if (h < kAsymmetryMin) return {0.0, 2, ratio};
  return {h, 0, ratio};
}

double band_weight_sum(const PesqTables& tables) {
  double s = 0.0;
  for (double w : tables.band_weight) s += w;
  return s;
}

std::vector<double> raw_bark(const Spectrogram& spec, const PesqTables& tables) {
  std::vector<double> out(spec.frames * kBarkBands, 0.0);
  for (std::size_t m = 0; m < spec.frames; ++m) {
    const auto row = spec.frame(m);
    for (std::size_t i = 0; i < kBarkBands; ++i) {
      double sum = 0.0;
      for (std::size_t k = tables.band_edges[i]; k < tables.band_edges[i + 1]; ++k)
        sum += std::norm(row[k]);
      out[m * kBarkBands + i] =
          sum / static_cast<double>(tables.band_edges[i + 1] - tables.band_edges[i]);
    }
  }
  return out;
}

// Level-aligned Bark spectrum of one signal and the pieces needed to
// differentiate it.
struct AlignedBark {
  Spectrogram spec;
  double band_power = 0.0;
  double gain_squared = 0.0;
  std::vector<double> raw;  // frames x 49 unaligned band means
  std::vector<BarkFrame> bark;
};

AlignedBark aligned_bark(std::span<const double> signal, const PesqTables& tables) {
  AlignedBark a;
  a.spec = stft(signal);
  a.band_power = band_power_300_3000(a.spec);
  if (!(a.band_power > 0.0))
    throw InvalidArgument("no energy between 300 Hz and 3 kHz; cannot level-align");
  a.gain_squared = alignment_gain_squared(a.band_power);
  a.raw = raw_bark(a.spec, tables);
  a.bark.resize(a.spec.frames);
  for (std::size_t m = 0; m < a.spec.frames; ++m)
    for (std::size_t i = 0; i < kBarkBands; ++i)
      a.bark[m][i] = a.gain_squared * a.raw[m * kBarkBands + i];
  return a;
}

// Everything the backward pass needs from one forward evaluation.
struct PesqForward {
  EqualizeTrace eq;
  std::vector<BarkFrame> loud_clean;
  std::vector<BarkFrame> loud_noisy;
  std::vector<BarkFrame> slope_clean;
  std::vector<BarkFrame> slope_noisy;
  std::vector<BarkFrame> dist;
  std::vector<std::array<DeadZone, kBarkBands>> zones;
  std::vector<std::array<Asymmetry, kBarkBands>> asym;
  PesqBreakdown result;
};

PesqForward pesq_forward(std::span<const BarkFrame> clean_bark,
                         std::span<const BarkFrame> noisy_bark,
                         const PesqTables& tables, BranchTrace* branches) {
  PesqForward f;
  const std::size_t frames = clean_bark.size();
  f.eq = equalize(clean_bark, noisy_bark, tables, branches);

  f.loud_clean.resize(frames);
  f.loud_noisy.resize(frames);
  f.slope_clean.resize(frames);
  f.slope_noisy.resize(frames);
  f.dist.resize(frames);
  f.zones.resize(frames);
  f.asym.resize(frames);
  f.result.fd_per_frame.resize(frames);
  f.result.afd_per_frame.resize(frames);

  const double weight_sum = band_weight_sum(tables);
  for (std::size_t m = 0; m < frames; ++m) {
    double sym = 0.0;
    double asy = 0.0;
    for (std::size_t i = 0; i < kBarkBands; ++i) {
      const auto lc = loudness_with_slope(f.eq.clean_eq[m][i], i, tables);
      const auto ln = loudness_with_slope(f.eq.noisy_eq[m][i], i, tables);
      f.loud_clean[m][i] = lc.value;
      f.loud_noisy[m][i] = ln.value;
      f.slope_clean[m][i] = lc.slope;
      f.slope_noisy[m][i] = ln.slope;
      const DeadZone z = dead_zone(lc.value, ln.value);
      f.zones[m][i] = z;
      f.dist[m][i] = z.value;
      const Asymmetry h = asymmetry(clean_bark[m][i], noisy_bark[m][i]);
      f.asym[m][i] = h;
      if (branches) {
        branches->record(f.eq.clean_eq[m][i] > tables.hearing_threshold[i]);
        branches->record(f.eq.noisy_eq[m][i] > tables.hearing_threshold[i]);
        branches->record_choice(z.branch);
        branches->record(z.noisy_min);
        branches->record_choice(h.branch);
      }
      const double wd = tables.band_weight[i] * z.value;
      sym += wd * wd;
      asy += wd * wd * h.value * h.value;
    }
    f.result.fd_per_frame[m] = std::sqrt(sym / weight_sum);
    f.result.afd_per_frame[m] = std::sqrt(asy / weight_sum);
  }
  PesqBreakdown agg = aggregate(f.result.fd_per_frame, f.result.afd_per_frame);
  f.result.d_sym = agg.d_sym;
  f.result.d_asym = agg.d_asym;
  f.result.value = agg.value;
  return f;
}

// d psqm_average / d frame_disturbance, scaled by `upstream`.
void psqm_average_backward(std::span<const double> fd, double upstream,
                           std::span<double> grad) {
  const std::size_t windows = (fd.size() - kPsqmWindow) / kPsqmHop + 1;
  std::vector<double> psqm(windows);
  for (std::size_t s = 0; s < windows; ++s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kPsqmWindow; ++i)
      acc += std::pow(fd[s * kPsqmHop + i], 6.0);
    psqm[s] = std::pow(acc / static_cast<double>(kPsqmWindow), 1.0 / 6.0);
  }
  const double d = psqm_average(fd);
  if (d == 0.0) return;  // sqrt at zero: subgradient 0
  for (std::size_t s = 0; s < windows; ++s) {
    if (psqm[s] == 0.0) continue;
    const double g_psqm = upstream * psqm[s] / (static_cast<double>(windows) * d);
    const double p5 = std::pow(psqm[s], 5.0);
    for (std::size_t i = 0; i < kPsqmWindow; ++i) {
      const double x = fd[s * kPsqmHop + i];
      grad[s * kPsqmHop + i] +=
          g_psqm * std::pow(x, 5.0) / (static_cast<double>(kPsqmWindow) * p5);
    }
  }
}

}  // namespace

double band_power_300_3000(const Spectrogram& spec) {
  const BandRange r = level_bins(spec.window_len);
  detail::Accumulator total;
  for (std::size_t m = 0; m < spec.frames; ++m)
    for (std::size_t k = r.first; k <= r.last; ++k) total += std::norm(spec.at(m, k));
  return total.value() / static_cast<double>(spec.frames);
}

double level_alignment_gain(std::span<const double> signal) {
  const double p = band_power_300_3000(stft(signal));
  if (!(p > 0.0))
    throw InvalidArgument("no energy between 300 Hz and 3 kHz; cannot level-align");
  return std::sqrt(alignment_gain_squared(p));
}

std::vector<double> level_align(std::span<const double> signal) {
  const double g = level_alignment_gain(signal);
  std::vector<double> out(signal.begin(), signal.end());
  for (double& x : out) x *= g;
  return out;
}

std::vector<BarkFrame> bark_spectrum(const Spectrogram& spec,
                                     const PesqTables& tables) {
  check_grid(spec);
  const auto raw = raw_bark(spec, tables);
  std::vector<BarkFrame> out(spec.frames);
  for (std::size_t m = 0; m < spec.frames; ++m)
    std::copy_n(raw.begin() + static_cast<std::ptrdiff_t>(m * kBarkBands),
                kBarkBands, out[m].begin());
  return out;
}

Equalized tf_equalize(std::span<const BarkFrame> clean,
                      std::span<const BarkFrame> noisy,
                      const PesqTables& tables) {
  EqualizeTrace t = equalize(clean, noisy, tables, nullptr);
  return {std::move(t.clean_eq), std::move(t.noisy_eq), t.ratio,
          std::move(t.gain)};
}

double loudness_density(double power, std::size_t band, const PesqTables& tables) {
  return loudness_with_slope(power, band, tables).value;
}

std::vector<BarkFrame> loudness(std::span<const BarkFrame> power,
                                const PesqTables& tables) {
  std::vector<BarkFrame> out(power.size());
  for (std::size_t m = 0; m < power.size(); ++m)
    for (std::size_t i = 0; i < kBarkBands; ++i)
      out[m][i] = loudness_density(power[m][i], i, tables);
  return out;
}

double disturbance_density(double clean_loudness, double noisy_loudness) {
  return dead_zone(clean_loudness, noisy_loudness).value;
}

std::vector<BarkFrame> disturbance(std::span<const BarkFrame> clean_loudness,
                                   std::span<const BarkFrame> noisy_loudness) {
  if (clean_loudness.size() != noisy_loudness.size())
    throw InvalidArgument("loudness shapes differ");
  std::vector<BarkFrame> out(clean_loudness.size());
  for (std::size_t m = 0; m < out.size(); ++m)
    for (std::size_t i = 0; i < kBarkBands; ++i)
      out[m][i] = disturbance_density(clean_loudness[m][i], noisy_loudness[m][i]);
  return out;
}

double asymmetry_factor(double clean_power, double noisy_power) {
  return asymmetry(clean_power, noisy_power).value;
}

FrameDisturbances frame_disturbances(std::span<const BarkFrame> disturbance,
                                     std::span<const BarkFrame> clean_bark,
                                     std::span<const BarkFrame> noisy_bark,
                                     const PesqTables& tables) {
  const std::size_t frames = disturbance.size();
  if (clean_bark.size() != frames || noisy_bark.size() != frames)
    throw InvalidArgument("frame counts differ");
  const double weight_sum = band_weight_sum(tables);
  FrameDisturbances out;
  out.symmetric.resize(frames);
  out.asymmetric.resize(frames);
  for (std::size_t m = 0; m < frames; ++m) {
    double sym = 0.0;
    double asy = 0.0;
    for (std::size_t i = 0; i < kBarkBands; ++i) {
      const double wd = tables.band_weight[i] * disturbance[m][i];
      const double h = asymmetry_factor(clean_bark[m][i], noisy_bark[m][i]);
      sym += wd * wd;
      asy += (wd * h) * (wd * h);
    }
    out.symmetric[m] = std::sqrt(sym / weight_sum);
    out.asymmetric[m] = std::sqrt(asy / weight_sum);
  }
  return out;
}

double psqm_average(std::span<const double> frame_disturbance) {
  if (frame_disturbance.size() < kPsqmWindow)
    throw InvalidArgument("PESQ aggregation needs at least 20 frames (about 0.35 s)");
  const std::size_t windows = (frame_disturbance.size() - kPsqmWindow) / kPsqmHop + 1;
  detail::Accumulator mean_sq;
  for (std::size_t s = 0; s < windows; ++s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kPsqmWindow; ++i)
      acc += std::pow(frame_disturbance[s * kPsqmHop + i], 6.0);
    const double psqm = std::pow(acc / static_cast<double>(kPsqmWindow), 1.0 / 6.0);
    mean_sq += psqm * psqm;
  }
  return std::sqrt(mean_sq.value() / static_cast<double>(windows));
}

PesqBreakdown aggregate(std::span<const double> fd, std::span<const double> afd) {
  if (fd.size() != afd.size())
    throw InvalidArgument("FD and AFD lengths differ");
  PesqBreakdown b;
  b.fd_per_frame.assign(fd.begin(), fd.end());
  b.afd_per_frame.assign(afd.begin(), afd.end());
  b.d_sym = psqm_average(fd);
  b.d_asym = psqm_average(afd);
  b.value = kPesqCeiling - kSymWeight * b.d_sym - kAsymWeight * b.d_asym;
  return b;
}

double aggregate_batch(std::span<const PesqBreakdown> utterances) {
  if (utterances.empty()) throw InvalidArgument("empty batch");
  double sym = 0.0;
  double asy = 0.0;
  for (const auto& u : utterances) {
    sym += u.d_sym;
    asy += u.d_asym;
  }
  const double n = static_cast<double>(utterances.size());
  return kPesqCeiling - kSymWeight * sym / n - kAsymWeight * asy / n;
}

PesqBreakdown loss_pesq(std::span<const double> clean,
                        std::span<const double> estimate,
                        const PesqTables& tables) {
  if (clean.size() != estimate.size())
    throw InvalidArgument("clean and estimate lengths differ");
  const AlignedBark c = aligned_bark(clean, tables);
  const AlignedBark n = aligned_bark(estimate, tables);
  return pesq_forward(c.bark, n.bark, tables, nullptr).result;
}

struct PesqObjective::CleanSide {
  AlignedBark aligned;
};

PesqObjective::PesqObjective(std::vector<double> clean, const PesqTables& tables)
    : tables_(tables), length_(clean.size()) {
  auto side = std::make_unique<CleanSide>();
  side->aligned = aligned_bark(clean, tables_);
  if (side->aligned.spec.frames < kPsqmWindow)
    throw InvalidArgument("PESQ needs at least 20 frames (about 0.35 s)");
  clean_ = std::move(side);
}

PesqObjective::~PesqObjective() = default;

Evaluation PesqObjective::evaluate(std::span<const double> estimate,
                                   bool want_gradient) const {
  if (estimate.size() != length_)
    throw InvalidArgument("pesq: estimate length differs from clean");
  const auto& cb = clean_->aligned.bark;
  const AlignedBark noisy = aligned_bark(estimate, tables_);
  require_finite(noisy.raw, "pesq/bark_spectrum");

  BranchTrace branches;
  PesqForward f = pesq_forward(cb, noisy.bark, tables_, &branches);
  require_finite(f.result.value, "pesq/aggregate");
  for (double x : f.result.fd_per_frame) branches.record(x == 0.0);
  for (double x : f.result.afd_per_frame) branches.record(x == 0.0);

  Evaluation eval;
  eval.value = f.result.value;
  eval.branches = branches.digest();
  if (!want_gradient) return eval;

  const std::size_t frames = cb.size();
  const double weight_sum = band_weight_sum(tables_);

  // Aggregation.
  std::vector<double> g_fd(frames, 0.0);
  std::vector<double> g_afd(frames, 0.0);
  psqm_average_backward(f.result.fd_per_frame, -kSymWeight, g_fd);
  psqm_average_backward(f.result.afd_per_frame, -kAsymWeight, g_afd);

  // Frame disturbances, dead zone and loudness.
  std::vector<BarkFrame> g_clean_eq(frames);
  std::vector<BarkFrame> g_noisy_eq(frames);
  std::vector<BarkFrame> g_bark(frames);  // d value / d B_n (level-aligned)
  for (std::size_t m = 0; m < frames; ++m) {
    const double fd = f.result.fd_per_frame[m];
    const double afd = f.result.afd_per_frame[m];
    for (std::size_t i = 0; i < kBarkBands; ++i) {
      const double w2 = tables_.band_weight[i] * tables_.band_weight[i];
      const double d = f.dist[m][i];
      const Asymmetry& h = f.asym[m][i];
      double g_d = 0.0;
      if (fd > 0.0) g_d += g_fd[m] * w2 * d / (weight_sum * fd);
      if (afd > 0.0) {
        g_d += g_afd[m] * w2 * h.value * h.value * d / (weight_sum * afd);
        if (h.branch == 0) {
          const double g_h = g_afd[m] * w2 * d * d * h.value / (weight_sum * afd);
          // h = ratio^1.2, ratio = (B_n + 50) / (B_c + 50)
          g_bark[m][i] += g_h * kAsymmetryPower *
                          std::pow(h.ratio, kAsymmetryPower - 1.0) /
                          (cb[m][i] + kAsymmetryOffset);
        }
      }

      const DeadZone& z = f.zones[m][i];
      double g_lc = 0.0;
      double g_ln = 0.0;
      if (z.branch != 0) {
        // D = (L_c - L_n) -+ 0.25 min(L_c, L_n)
        const double sign = z.branch == 1 ? -1.0 : 1.0;
        g_lc = g_d;
        g_ln = -g_d;
        if (z.noisy_min)
          g_ln += sign * kDeadZone * g_d;
        else
          g_lc += sign * kDeadZone * g_d;
      }
      g_clean_eq[m][i] = g_lc * f.slope_clean[m][i];
      g_noisy_eq[m][i] = g_ln * f.slope_noisy[m][i];
    }
  }

  // Noisy-path gain compensation: E_n = gain_m * B_n.
  const EqualizeTrace& eq = f.eq;
  std::vector<double> g_smoothed(frames, 0.0);
  for (std::size_t m = 0; m < frames; ++m) {
    double g_gain = 0.0;
    for (std::size_t i = 0; i < kBarkBands; ++i) {
      g_bark[m][i] += eq.gain[m] * g_noisy_eq[m][i];
      g_gain += noisy.bark[m][i] * g_noisy_eq[m][i];
    }
    const double s = eq.smoothed_gain[m];
    if (s <= kMaxFrameGain && s >= kMinFrameGain) g_smoothed[m] = g_gain;
  }
  std::vector<double> g_raw(frames, 0.0);
  for (std::size_t m = frames; m-- > 0;) {
    if (m == 0) {
      g_raw[m] = g_smoothed[m];
    } else {
      g_raw[m] = (1.0 - kGainSmoothing) * g_smoothed[m];
      g_smoothed[m - 1] += kGainSmoothing * g_smoothed[m];
    }
  }
  for (std::size_t m = 0; m < frames; ++m) {
    const double denom = eq.audible_noisy[m] + kEqualizeConstant;
    const double g_ac = g_raw[m] / denom;
    const double g_an = -g_raw[m] * eq.raw_gain[m] / denom;
    for (std::size_t i = 1; i < kBarkBands; ++i) {
      if (eq.clean_eq[m][i] > tables_.hearing_threshold[i])
        g_clean_eq[m][i] += g_ac;
      if (noisy.bark[m][i] > tables_.hearing_threshold[i]) g_bark[m][i] += g_an;
    }
  }

  // Clean-path frequency compensation: E_c = ratio_i * B_c, where
  // ratio_i = (P_n,i + c1) / (P_c,i + c1) and P_n,i averages masked B_n.
  BarkFrame g_ratio{};
  for (std::size_t m = 0; m < frames; ++m)
    for (std::size_t i = 0; i < kBarkBands; ++i)
      g_ratio[i] += cb[m][i] * g_clean_eq[m][i];
  const double inv_frames = 1.0 / static_cast<double>(frames);
  for (std::size_t i = 0; i < kBarkBands; ++i) {
    const double g_avg = g_ratio[i] / (eq.clean_avg[i] + kEqualizeConstant);
    for (std::size_t m = 0; m < frames; ++m)
      if (noisy.bark[m][i] > tables_.silence_noisy[i])
        g_bark[m][i] += g_avg * inv_frames;
  }

  // Level alignment: B_n = g2 * raw, g2 = 1e7 / (band_power + eps).
  double g_g2 = 0.0;
  for (std::size_t m = 0; m < frames; ++m)
    for (std::size_t i = 0; i < kBarkBands; ++i)
      g_g2 += noisy.raw[m * kBarkBands + i] * g_bark[m][i];
  const double g_band_power =
      -g_g2 * noisy.gain_squared / (noisy.band_power + kEps);

  // Back to |Y|^2, then to the complex spectrum and the waveform.
  Spectrogram g_spec(noisy.spec.frames, noisy.spec.window_len, noisy.spec.hop,
                     noisy.spec.signal_length);
  const BandRange r = level_bins(noisy.spec.window_len);
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t i = 0; i < kBarkBands; ++i) {
      const std::size_t lo = tables_.band_edges[i];
      const std::size_t hi = tables_.band_edges[i + 1];
      const double g_pow =
          noisy.gain_squared * g_bark[m][i] / static_cast<double>(hi - lo);
      for (std::size_t k = lo; k < hi; ++k)
        g_spec.at(m, k) = 2.0 * g_pow * noisy.spec.at(m, k);
    }
    for (std::size_t k = r.first; k <= r.last; ++k)
      g_spec.at(m, k) += 2.0 * g_band_power * inv_frames * noisy.spec.at(m, k);
  }
  eval.gradient = stft_adjoint(g_spec);
  require_finite(eval.gradient, "pesq/gradient");
  return eval;
}

}  // namespace percloss
