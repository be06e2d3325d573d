#include "percloss/stoi.hpp"

#include <cmath>

#include "accumulate.hpp"
#include "percloss/errors.hpp"

namespace percloss {

namespace {

double clip_factor() { return 1.0 + std::pow(10.0, -kStoiClipDb / 20.0); }

std::size_t nearest_bin(double hz, std::size_t window_len) {
  const double bin_hz = static_cast<double>(kSampleRate) /
                        static_cast<double>(window_len);
  // Ties resolve to the lower bin.
  const double pos = hz / bin_hz;
  const double lower = std::floor(pos);
  return static_cast<std::size_t>(pos - lower > 0.5 ? lower + 1.0 : lower);
}

// Forward state of one segment, kept for the backward pass.
struct SegmentState {
  std::vector<double> clean;   // c
  std::vector<double> scaled;  // alpha * n
  std::vector<double> out;     // clipped
  std::vector<bool> pass;      // scaled sample passed the clip
  double clean_norm = 0.0;
  double noisy_norm = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  bool silent_clean = false;
};

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

SegmentState segment_forward(const EnvelopeMatrix& clean, const EnvelopeMatrix& noisy,
                             std::size_t m, std::size_t j, std::size_t n_frames) {
  SegmentState s;
  s.clean.resize(n_frames);
  s.scaled.resize(n_frames);
  s.out.resize(n_frames);
  s.pass.resize(n_frames);
  std::vector<double> noisy_seg(n_frames);
  const std::size_t start = m + 1 - n_frames;
  for (std::size_t t = 0; t < n_frames; ++t) {
    s.clean[t] = clean.at(start + t, j);
    noisy_seg[t] = noisy.at(start + t, j);
  }
  s.clean_norm = norm(s.clean);
  s.noisy_norm = norm(noisy_seg);
  s.silent_clean = s.clean_norm == 0.0;
  s.alpha = s.clean_norm / (s.noisy_norm + kEps);
  const double bound = clip_factor();
  for (std::size_t t = 0; t < n_frames; ++t) {
    s.scaled[t] = s.alpha * noisy_seg[t];
    const double limit = bound * s.clean[t];
    s.pass[t] = s.scaled[t] <= limit;  // min(): ties keep the scaled sample
    s.out[t] = s.pass[t] ? s.scaled[t] : limit;
  }
  s.d = segment_correlation(s.out, s.clean);
  return s;
}

void check_shapes(const EnvelopeMatrix& a, const EnvelopeMatrix& b) {
  if (a.frames != b.frames || a.bands != b.bands)
    throw InvalidArgument("clean and noisy envelope shapes differ");
}

}  // namespace

StoiBreakdown stoi_breakdown(const EnvelopeMatrix& clean, const EnvelopeMatrix& noisy) {
  check_shapes(clean, noisy);
  if (clean.frames < kStoiSegment)
    throw InvalidArgument("STOI needs at least 24 frames (384 ms of audio)");
  StoiBreakdown b;
  b.frames = clean.frames - kStoiSegment + 1;
  b.bands = clean.bands;
  b.d_matrix.resize(b.frames * b.bands);
  detail::Accumulator sum;
  for (std::size_t r = 0; r < b.frames; ++r) {
    for (std::size_t j = 0; j < b.bands; ++j) {
      const SegmentScore s = stoi_segment(clean, noisy, r + kStoiSegment - 1, j);
      b.d_matrix[r * b.bands + j] = s.d;
      if (s.silent_clean) ++b.silent_segments;
      sum += s.d;
    }
  }
  b.value = sum.value() / static_cast<double>(b.d_matrix.size());
  return b;
}

OctaveBands third_octave_bands(std::size_t window_len, Diagnostics* diag) {
  OctaveBands bands;
  const std::size_t nyquist_bin = window_len / 2;
  for (std::size_t j = 0; j < kStoiBands; ++j) {
    const double k = static_cast<double>(j);
    const double center = kStoiLowestCenter * std::pow(2.0, k / 3.0);
    const double lo_hz = kStoiLowestCenter * std::pow(2.0, (2.0 * k - 1.0) / 6.0);
    const double hi_hz = kStoiLowestCenter * std::pow(2.0, (2.0 * k + 1.0) / 6.0);
    const std::size_t lo = nearest_bin(lo_hz, window_len);
    const std::size_t hi = std::min(nearest_bin(hi_hz, window_len), nyquist_bin + 1);
    if (lo >= hi) {
      if (diag)
        diag->warnings.push_back("stoi: dropped band centred at " +
                                 std::to_string(center) + " Hz (no bins)");
      continue;
    }
    bands.low.push_back(lo);
    bands.high.push_back(hi);
    bands.centers.push_back(center);
  }
  return bands;
}

EnvelopeMatrix octave_decompose(const Spectrogram& spec, const OctaveBands& bands) {
  EnvelopeMatrix env;
  env.frames = spec.frames;
  env.bands = bands.count();
  env.values.assign(env.frames * env.bands, 0.0);
  for (std::size_t j = 0; j < env.bands; ++j)
    if (bands.high[j] > spec.bins)
      throw InvalidArgument("octave band exceeds the spectrogram bins");
  for (std::size_t m = 0; m < spec.frames; ++m) {
    for (std::size_t j = 0; j < env.bands; ++j) {
      double s = 0.0;
      for (std::size_t k = bands.low[j]; k < bands.high[j]; ++k)
        s += std::norm(spec.at(m, k));
      env.at(m, j) = std::sqrt(s);
    }
  }
  return env;
}

double segment_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw InvalidArgument("correlation needs two equal, nonempty vectors");
  const double ma = mean(a);
  const double mb = mean(b);
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double x = a[t] - ma;
    const double y = b[t] - mb;
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  return dot / (std::sqrt(na) * std::sqrt(nb) + kEps);
}

SegmentScore stoi_segment(const EnvelopeMatrix& clean, const EnvelopeMatrix& noisy,
                          std::size_t m, std::size_t j, std::size_t segment) {
  check_shapes(clean, noisy);
  if (segment == 0 || m + 1 < segment || m >= clean.frames || j >= clean.bands)
    throw InvalidArgument("segment index out of range");
  const SegmentState s = segment_forward(clean, noisy, m, j, segment);
  return {s.d, s.silent_clean};
}

StoiBreakdown loss_stoi(std::span<const double> clean, std::span<const double> estimate) {
  if (clean.size() != estimate.size())
    throw InvalidArgument("clean and estimate lengths differ");
  if (clean.size() < kWindowLength)
    throw InvalidArgument("STOI needs at least 384 ms of audio");
  const OctaveBands bands = third_octave_bands();
  return stoi_breakdown(octave_decompose(stft(clean), bands),
                             octave_decompose(stft(estimate), bands));
}

double stoi_average(std::span<const StoiBreakdown> utterances) {
  if (utterances.empty()) throw InvalidArgument("empty batch");
  detail::Accumulator sum;
  std::size_t count = 0;
  for (const auto& u : utterances) {
    for (double d : u.d_matrix) sum += d;
    count += u.d_matrix.size();
  }
  if (count == 0) throw InvalidArgument("batch has no segments");
  return sum.value() / static_cast<double>(count);
}

StoiObjective::StoiObjective(std::vector<double> clean)
    : length_(clean.size()), bands_(third_octave_bands()) {
  if (clean.size() < kWindowLength)
    throw InvalidArgument("STOI needs at least 384 ms of audio");
  clean_env_ = octave_decompose(stft(clean), bands_);
  if (clean_env_.frames < kStoiSegment)
    throw InvalidArgument("STOI needs at least 24 frames (384 ms of audio)");
}

Evaluation StoiObjective::evaluate(std::span<const double> estimate,
                                   bool want_gradient) const {
  if (estimate.size() != length_)
    throw InvalidArgument("stoi: estimate length differs from clean");
  const Spectrogram spec = stft(estimate);
  const EnvelopeMatrix noisy = octave_decompose(spec, bands_);
  require_finite(noisy.values, "stoi/octave_decompose");

  const std::size_t n_frames = kStoiSegment;
  const std::size_t segments = noisy.frames - n_frames + 1;
  const double scale = 1.0 / static_cast<double>(segments * noisy.bands);

  BranchTrace branches;
  Evaluation eval;
  EnvelopeMatrix g_env;
  if (want_gradient) {
    g_env.frames = noisy.frames;
    g_env.bands = noisy.bands;
    g_env.values.assign(noisy.values.size(), 0.0);
  }

  detail::Accumulator sum;
  std::vector<double> g_out(n_frames);
  for (std::size_t r = 0; r < segments; ++r) {
    const std::size_t m = r + n_frames - 1;
    for (std::size_t j = 0; j < noisy.bands; ++j) {
      const SegmentState s = segment_forward(clean_env_, noisy, m, j, n_frames);
      sum += s.d;
      for (bool p : s.pass) branches.record(p);
      branches.record(s.noisy_norm == 0.0);
      if (!want_gradient) continue;

      // d = u / (v + eps), u = yc^T cc, v = |yc| |cc|, yc/cc mean-removed.
      const double my = mean(s.out);
      const double mc = mean(s.clean);
      double u = 0.0;
      double ny = 0.0;
      double nc = 0.0;
      for (std::size_t t = 0; t < n_frames; ++t) {
        u += (s.out[t] - my) * (s.clean[t] - mc);
        ny += (s.out[t] - my) * (s.out[t] - my);
        nc += (s.clean[t] - mc) * (s.clean[t] - mc);
      }
      ny = std::sqrt(ny);
      nc = std::sqrt(nc);
      const double denom = ny * nc + kEps;
      branches.record(ny == 0.0);
      for (std::size_t t = 0; t < n_frames; ++t) {
        double g = (s.clean[t] - mc) / denom;
        if (ny > 0.0) g -= u / (denom * denom) * nc * (s.out[t] - my) / ny;
        g_out[t] = s.pass[t] ? scale * g : 0.0;
      }

      // scaled = alpha n, alpha = |c| / (|n| + eps).
      const std::size_t start = m + 1 - n_frames;
      double g_alpha = 0.0;
      for (std::size_t t = 0; t < n_frames; ++t)
        g_alpha += g_out[t] * noisy.at(start + t, j);
      const double d_alpha_d_norm =
          -s.clean_norm / ((s.noisy_norm + kEps) * (s.noisy_norm + kEps));
      for (std::size_t t = 0; t < n_frames; ++t) {
        double g = s.alpha * g_out[t];
        if (s.noisy_norm > 0.0)
          g += g_alpha * d_alpha_d_norm * noisy.at(start + t, j) / s.noisy_norm;
        g_env.at(start + t, j) += g;
      }
    }
  }
  eval.value = sum.value() * scale;
  require_finite(eval.value, "stoi/average");
  eval.branches = branches.digest();
  if (!want_gradient) return eval;

  // Envelope e = sqrt(sum |X|^2): dL/dX = g X / e, zero where e == 0.
  Spectrogram g_spec(spec.frames, spec.window_len, spec.hop, spec.signal_length);
  for (std::size_t m = 0; m < spec.frames; ++m) {
    for (std::size_t j = 0; j < noisy.bands; ++j) {
      const double e = noisy.at(m, j);
      if (e == 0.0) continue;
      const double g = g_env.at(m, j) / e;
      for (std::size_t k = bands_.low[j]; k < bands_.high[j]; ++k)
        g_spec.at(m, k) = g * spec.at(m, k);
    }
  }
  eval.gradient = stft_adjoint(g_spec);
  require_finite(eval.gradient, "stoi/gradient");
  return eval;
}

}  // namespace percloss
