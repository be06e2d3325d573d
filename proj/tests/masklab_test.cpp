#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "percloss/errors.hpp"
#include "percloss/masklab.hpp"
#include "percloss/sdr.hpp"
#include "percloss/synth.hpp"

using namespace percloss;

namespace {

Spectrogram one_bin(std::complex<double> v) {
  Spectrogram s(1, 512, 256, 0);
  s.at(0, 0) = v;
  return s;
}

}  // namespace

TEST_CASE("IAM and PSM on single bins") {
  // |X| = 5, |Y| = 10, in phase.
  CHECK(oracle_iam(one_bin({3.0, 4.0}), one_bin({6.0, 8.0})).at(0, 0) ==
        doctest::Approx(0.5));
  // |X| / |Y| = 4 clips at the cap.
  CHECK(oracle_iam(one_bin({4.0, 0.0}), one_bin({1.0, 0.0})).at(0, 0) == 2.0);
  CHECK(oracle_iam(one_bin({4.0, 0.0}), one_bin({1.0, 0.0}), 3.0).at(0, 0) == 3.0);
  // Quadrature: cos = 0.
  CHECK(oracle_psm(one_bin({1.0, 0.0}), one_bin({0.0, 2.0})).at(0, 0) == 0.0);
  // 60 degrees apart: 0.5 * cos(pi / 3) = 0.25.
  const std::complex<double> y = std::polar(2.0, std::numbers::pi / 3.0);
  CHECK(oracle_psm(one_bin({1.0, 0.0}), one_bin(y)).at(0, 0) ==
        doctest::Approx(0.25).epsilon(1e-12));
  // Opposite phase clips to zero; ratio above one clips to one.
  CHECK(oracle_psm(one_bin({1.0, 0.0}), one_bin({-1.0, 0.0})).at(0, 0) == 0.0);
  CHECK(oracle_psm(one_bin({5.0, 0.0}), one_bin({1.0, 0.0})).at(0, 0) == 1.0);
  // Zero clean bin.
  CHECK(oracle_iam(one_bin(0.0), one_bin({1.0, 1.0})).at(0, 0) == 0.0);
  CHECK(oracle_psm(one_bin(0.0), one_bin({1.0, 1.0})).at(0, 0) == 0.0);

  Spectrogram two(2, 512, 256, 256);
  CHECK_THROWS_AS(oracle_iam(one_bin(1.0), two), InvalidArgument);
}

TEST_CASE("apply_mask with unit and zero masks") {
  const auto x = testing::random_vector(5000, 2);
  const Spectrogram y = stft(x);
  const auto same = apply_mask(y, Mask(y.frames, y.bins, 1.0));
  REQUIRE(same.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(same[i] - x[i]) < 1e-12);
  for (double v : apply_mask(y, Mask(y.frames, y.bins, 0.0))) CHECK(v == 0.0);
  CHECK_THROWS_AS(apply_mask(y, Mask(y.frames + 1, y.bins, 1.0)), InvalidArgument);
}

TEST_CASE("zero theta is the identity mask") {
  MaskParams p;
  p.theta = Mask(3, 4, 0.0);
  for (double v : p.mask().values) CHECK(v == 1.0);
  p.theta.values[0] = 50.0;
  p.theta.values[1] = -800.0;
  const Mask m = p.mask();
  CHECK(m.values[0] == doctest::Approx(2.0));
  CHECK(m.values[1] == 0.0);
}

TEST_CASE("oracle masks improve a noisy mixture") {
  const auto x = clean_proxy(3, 1.5);
  const auto mix = mix_at_snr(x, make_noise(NoiseType::White, x.size(), 4), 0.0);
  const Spectrogram sx = stft(x);
  const Spectrogram sy = stft(mix.noisy);
  const double base = si_sdr(x, mix.noisy).db;
  const double iam = si_sdr(x, apply_mask(sy, oracle_iam(sx, sy))).db;
  const double psm = si_sdr(x, apply_mask(sy, oracle_psm(sx, sy))).db;
  CHECK(iam > base + 3.0);
  CHECK(psm > base + 3.0);
}

TEST_CASE("refine trace is non-decreasing and improves SI-SDR") {
  const auto x = clean_proxy(6, 1.0);
  const auto n = make_noise(NoiseType::White, x.size(), 7);
  RefineOptions opts;
  opts.loss = LossKind::Sdr;
  opts.steps = 40;
  const RefineResult r = refine(x, n, 0.0, opts);
  REQUIRE(r.trace.steps.size() == 41);
  CHECK(r.trace.steps[0].step == 0);
  CHECK(r.trace.steps[0].si_sdr_db ==
        doctest::Approx(si_sdr(x, mix_at_snr(x, n, 0.0).noisy).db).epsilon(1e-9));
  std::size_t accepted = 0;
  for (std::size_t t = 1; t < r.trace.steps.size(); ++t) {
    CHECK(r.trace.steps[t].step == t);
    CHECK(r.trace.steps[t].objective >= r.trace.steps[t - 1].objective);
    if (r.trace.steps[t].accepted) ++accepted;
  }
  CHECK(accepted > 0);
  CHECK(r.trace.steps.back().si_sdr_db > r.trace.steps[0].si_sdr_db + 3.0);
  CHECK(si_sdr(x, r.denoised).db == doctest::Approx(r.trace.steps.back().si_sdr_db));
}

TEST_CASE("refine with perceptual terms keeps a non-decreasing objective") {
  const auto x = clean_proxy(8, 1.0);
  const auto n = make_noise(NoiseType::Pink, x.size(), 9);
  RefineOptions opts;
  opts.loss = LossKind::SdrPesqStoi;
  opts.steps = 10;
  const RefineResult r = refine(x, n, 5.0, opts);
  for (std::size_t t = 1; t < r.trace.steps.size(); ++t)
    CHECK(r.trace.steps[t].objective >= r.trace.steps[t - 1].objective);
  const auto& last = r.trace.steps.back();
  CHECK(last.objective ==
        doctest::Approx(last.si_sdr_db + last.pesq_loss + last.stoi_loss).epsilon(1e-9));
}

TEST_CASE("refine argument checks") {
  const auto x = clean_proxy(1, 1.0);
  RefineOptions opts;
  opts.steps = 1;
  opts.step_size = 0.0;
  CHECK_THROWS_AS(refine_mixture(x, x, opts), InvalidArgument);
  opts.step_size = 0.5;
  CHECK_THROWS_AS(refine_mixture(x, std::vector<double>(x.size() - 1, 0.1), opts),
                  InvalidArgument);
}
