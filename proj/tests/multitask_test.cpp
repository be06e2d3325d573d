#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "percloss/errors.hpp"
#include "percloss/multitask.hpp"
#include "percloss/sdr.hpp"
#include "percloss/stoi.hpp"
#include "percloss/synth.hpp"

using namespace percloss;

namespace {

struct Pair {
  std::vector<double> clean;
  std::vector<double> estimate;
};

Pair noisy_pair(std::uint64_t seed, double snr) {
  Pair p;
  p.clean = clean_proxy(seed, 1.5);
  p.estimate =
      mix_at_snr(p.clean, make_noise(NoiseType::Pink, p.clean.size(), seed + 50), snr).noisy;
  return p;
}

}  // namespace

TEST_CASE("loss names round trip") {
  for (LossKind k : kAllLossKinds) {
    const auto parsed = parse_loss_name(loss_name(k));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == k);
  }
  CHECK(loss_name(LossKind::SdrPesqStoi) == "sdr-pesq-stoi");
  CHECK_FALSE(parse_loss_name("SDR").has_value());
  CHECK_FALSE(parse_loss_name("").has_value());
}

TEST_CASE("combined losses are the weighted sums of their parts") {
  const Pair p = noisy_pair(3, 5.0);
  const double s = si_sdr(p.clean, p.estimate).db;
  const double q = loss_pesq(p.clean, p.estimate).value;
  const double o = loss_stoi(p.clean, p.estimate).value;
  CHECK(loss_sdr_pesq(p.clean, p.estimate, 0.3) == doctest::Approx(s + 0.3 * q).epsilon(1e-14));
  CHECK(loss_sdr_stoi(p.clean, p.estimate, 2.0) == doctest::Approx(s + 2.0 * o).epsilon(1e-14));
  CHECK(loss_sdr_pesq_stoi(p.clean, p.estimate, {0.5, 4.0}) ==
        doctest::Approx(s + 0.5 * q + 4.0 * o).epsilon(1e-14));
}

TEST_CASE("zero weights reduce to the simpler losses") {
  const Pair p = noisy_pair(4, 0.0);
  const double s = si_sdr(p.clean, p.estimate).db;
  CHECK(loss_sdr_pesq(p.clean, p.estimate, 0.0) == s);
  CHECK(loss_sdr_stoi(p.clean, p.estimate, 0.0) == s);
  CHECK(loss_sdr_pesq_stoi(p.clean, p.estimate, {0.0, 0.0}) == s);
  CHECK(loss_sdr_pesq_stoi(p.clean, p.estimate, {0.7, 0.0}) ==
        loss_sdr_pesq(p.clean, p.estimate, 0.7));
  CHECK(loss_sdr_pesq_stoi(p.clean, p.estimate, {0.0, 0.7}) ==
        loss_sdr_stoi(p.clean, p.estimate, 0.7));

  const auto full = make_objective(LossKind::SdrPesqStoi, p.clean, {0.0, 0.0});
  const auto sdr = make_objective(LossKind::Sdr, p.clean);
  const auto gf = gradient(*full, p.estimate);
  const auto gs = gradient(*sdr, p.estimate);
  CHECK(gf.value == gs.value);
  for (std::size_t i = 0; i < gs.d_input.size(); ++i) CHECK(gf.d_input[i] == gs.d_input[i]);
}

TEST_CASE("objectives agree with the scalar losses") {
  const Pair p = noisy_pair(5, 10.0);
  const CombinationWeights w{0.4, 3.0};
  CHECK(make_objective(LossKind::Sdr, p.clean)->evaluate(p.estimate, false).value ==
        doctest::Approx(si_sdr(p.clean, p.estimate).db).epsilon(1e-14));
  CHECK(make_objective(LossKind::SdrPesq, p.clean, w)->evaluate(p.estimate, false).value ==
        doctest::Approx(loss_sdr_pesq(p.clean, p.estimate, w.alpha)).epsilon(1e-12));
  CHECK(make_objective(LossKind::SdrStoi, p.clean, w)->evaluate(p.estimate, false).value ==
        doctest::Approx(loss_sdr_stoi(p.clean, p.estimate, w.beta)).epsilon(1e-12));
  CHECK(make_objective(LossKind::SdrPesqStoi, p.clean, w)->evaluate(p.estimate, false).value ==
        doctest::Approx(loss_sdr_pesq_stoi(p.clean, p.estimate, w)).epsilon(1e-12));
}

TEST_CASE("clean input scores the sum of the component maxima") {
  const auto x = clean_proxy(9, 1.5);
  const CombinationWeights w{0.25, 2.0};
  CHECK(loss_sdr_pesq(x, x, w.alpha) == doctest::Approx(120.0 + 0.25 * 4.5).epsilon(1e-12));
  CHECK(loss_sdr_stoi(x, x, w.beta) == doctest::Approx(120.0 + 2.0).epsilon(1e-9));
  CHECK(loss_sdr_pesq_stoi(x, x, w) == doctest::Approx(120.0 + 0.25 * 4.5 + 2.0).epsilon(1e-9));
}

TEST_CASE("weights are validated") {
  const Pair p = noisy_pair(6, 0.0);
  CHECK_THROWS_AS(loss_sdr_pesq(p.clean, p.estimate, -1.0), InvalidArgument);
  CHECK_THROWS_AS(loss_sdr_stoi(p.clean, p.estimate, NAN), InvalidArgument);
  CHECK_THROWS_AS(loss_sdr_pesq_stoi(p.clean, p.estimate, {1.0, -0.1}), InvalidArgument);
  CHECK_THROWS_AS(make_objective(LossKind::SdrPesq, p.clean, {INFINITY, 1.0}),
                  InvalidArgument);
  CHECK_NOTHROW(validate({0.0, 0.0}));
}

TEST_CASE("weighted sum rejects mismatched terms") {
  const auto a = std::make_shared<QuadraticObjective>(10);
  const auto b = std::make_shared<QuadraticObjective>(11);
  CHECK_THROWS_AS(WeightedSum("x", {}), InvalidArgument);
  CHECK_THROWS_AS(WeightedSum("x", {{1.0, a}, {1.0, b}}), InvalidArgument);
  const WeightedSum s("two", {{1.0, a}, {2.5, a}});
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto e = s.evaluate(x, true);
  CHECK(e.value == doctest::Approx(3.5 * 385.0));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(e.gradient[i] == doctest::Approx(7.0 * x[i]));
}

TEST_CASE("combined objective gradients match finite differences") {
  const Pair p = noisy_pair(7, 5.0);
  std::vector<double> est(p.estimate.begin(), p.estimate.begin() + 16000);
  std::vector<double> clean(p.clean.begin(), p.clean.begin() + 16000);
  for (LossKind k : {LossKind::SdrPesq, LossKind::SdrStoi, LossKind::SdrPesqStoi}) {
    CAPTURE(loss_name(k));
    const auto obj = make_objective(k, clean, {1.0, 1.0});
    const auto coords = generic_coordinates(*obj, est, 32, 1e-6, 7);
    CHECK(finite_diff_check(*obj, est, coords, 1e-6).max_rel_error < 1e-4);
  }
}
