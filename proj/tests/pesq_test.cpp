#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "helpers.hpp"
#include "percloss/errors.hpp"
#include "percloss/pesq.hpp"
#include "percloss/synth.hpp"

using namespace percloss;

namespace {

// Sections of the table file as raw number lists, read without the library.
std::map<std::string, std::vector<double>> raw_tables() {
  std::ifstream in(PERCLOSS_TABLES_PATH);
  std::map<std::string, std::vector<double>> out;
  std::string line, section;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line[0] == '[') {
      section = line.substr(1, line.find(']') - 1);
      continue;
    }
    if (section == "revision" || section == "checksum") continue;
    std::istringstream s(line);
    double v;
    while (s >> v) out[section].push_back(v);
  }
  return out;
}

std::string file_text() {
  std::ifstream in(PERCLOSS_TABLES_PATH, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<double> noisy_copy(const std::vector<double>& x, double snr_db,
                               std::uint64_t seed) {
  return mix_at_snr(x, make_noise(NoiseType::White, x.size(), seed), snr_db).noisy;
}

double brute_psqm(const std::vector<double>& fd) {
  std::vector<double> windows;
  for (std::size_t start = 0; start + 20 <= fd.size(); start += 10) {
    double acc = 0.0;
    for (std::size_t i = start; i < start + 20; ++i) acc += std::pow(fd[i], 6.0);
    windows.push_back(std::pow(acc / 20.0, 1.0 / 6.0));
  }
  double sq = 0.0;
  for (double w : windows) sq += w * w;
  return std::sqrt(sq / static_cast<double>(windows.size()));
}

}  // namespace

TEST_CASE("FNV-1a 64 reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("built-in tables equal the data file") {
  CHECK(PesqTables::builtin_text() == file_text());
  const PesqTables& b = PesqTables::builtin();
  const PesqTables f = PesqTables::load(PERCLOSS_TABLES_PATH);
  CHECK(b.band_edges == f.band_edges);
  CHECK(b.hearing_threshold == f.hearing_threshold);
  CHECK(b.version == 1);
  CHECK(b.revision.find("P.862") != std::string::npos);
}

TEST_CASE("tables are converted to local units") {
  const auto raw = raw_tables();
  const PesqTables& t = PesqTables::builtin();
  const auto& bins = raw.at("bins_per_band");
  REQUIRE(bins.size() == 49);
  std::size_t edge = 0;
  for (std::size_t i = 0; i < 49; ++i) {
    CHECK(t.band_edges[i] == edge);
    edge += static_cast<std::size_t>(bins[i]);
  }
  CHECK(t.band_edges[49] == 256);
  const double sp = raw.at("power_scale")[0];
  const double sl = raw.at("loudness_scale")[0];
  const double gamma = raw.at("zwicker_power")[0];
  for (std::size_t i = 0; i < 49; ++i) {
    const double unit = 3.0 * 512.0 * 512.0 / 16.0 * sp *
                        raw.at("power_correction")[i] * bins[i];
    CHECK(t.hearing_threshold[i] ==
          doctest::Approx(raw.at("hearing_threshold")[i] / unit).epsilon(1e-14));
    CHECK(t.silence_clean[i] == doctest::Approx(100.0 * t.hearing_threshold[i]));
    CHECK(t.loudness_scale[i] == doctest::Approx(sl * std::pow(unit, gamma)).epsilon(1e-14));
    CHECK(t.band_weight[i] == raw.at("band_width_bark")[i]);
  }
}

TEST_CASE("table parser rejects corruption") {
  std::string text = file_text();
  const auto pos = text.find("0.157344");
  REQUIRE(pos != std::string::npos);
  std::string changed = text;
  changed[pos + 7] = '5';
  CHECK_THROWS_AS(PesqTables::parse(changed), FormatError);
  CHECK_THROWS_AS(PesqTables::parse("[version]\n1\n"), FormatError);
  CHECK_THROWS_AS(PesqTables::load("/nonexistent/tables.txt"), IoError);
}

TEST_CASE("level alignment sets the 300-3000 Hz power to 1e7") {
  const auto x = clean_proxy(4, 1.0);
  const auto aligned = level_align(x);
  const Spectrogram s = stft(aligned);
  double total = 0.0;
  for (std::size_t m = 0; m < s.frames; ++m)
    for (std::size_t k = 0; k < s.bins; ++k) {
      const double hz = 31.25 * static_cast<double>(k);
      if (hz >= 300.0 && hz <= 3000.0) total += std::norm(s.at(m, k));
    }
  CHECK(total / static_cast<double>(s.frames) == doctest::Approx(1e7).epsilon(1e-12));
  CHECK(band_power_300_3000(s) == doctest::Approx(1e7).epsilon(1e-12));
  CHECK_THROWS_AS(level_alignment_gain(std::vector<double>(1000, 0.0)), InvalidArgument);
}

TEST_CASE("bark spectrum is the per-band mean bin power") {
  const auto x = testing::random_vector(3000, 8);
  const Spectrogram s = stft(x);
  const auto& t = PesqTables::builtin();
  const auto b = bark_spectrum(s, t);
  REQUIRE(b.size() == s.frames);
  for (std::size_t m = 0; m < s.frames; m += 3)
    for (std::size_t i = 0; i < 49; ++i) {
      double sum = 0.0;
      for (std::size_t k = t.band_edges[i]; k < t.band_edges[i + 1]; ++k)
        sum += std::norm(s.at(m, k));
      CHECK(b[m][i] == doctest::Approx(sum / double(t.band_edges[i + 1] - t.band_edges[i])));
    }
}

TEST_CASE("loudness, disturbance and asymmetry by hand") {
  const auto& t = PesqTables::builtin();
  const std::size_t i = 20;
  const double p0 = t.hearing_threshold[i];
  const double g = t.zwicker_power;
  CHECK(loudness_density(p0, i, t) == 0.0);
  CHECK(loudness_density(0.5 * p0, i, t) == 0.0);
  CHECK(loudness_density(3.0 * p0, i, t) ==
        doctest::Approx(t.loudness_scale[i] * std::pow(2.0 * p0, g) * (std::pow(2.0, g) - 1.0)));

  CHECK(disturbance_density(2.0, 1.0) == doctest::Approx(0.75));   // 1 - 0.25 * 1
  CHECK(disturbance_density(1.0, 2.0) == doctest::Approx(-0.75));
  CHECK(disturbance_density(1.0, 1.1) == 0.0);                      // inside dead zone
  CHECK(disturbance_density(0.0, 0.0) == 0.0);

  CHECK(asymmetry_factor(50.0, 950.0) == 12.0);  // 10^1.2 = 15.8, capped
  CHECK(asymmetry_factor(100.0, 100.0) == 0.0);  // 1 < 3, zeroed
  CHECK(asymmetry_factor(50.0, 200.0) == doctest::Approx(std::pow(2.5, 1.2)));
}

TEST_CASE("tf_equalize against a direct recomputation") {
  const auto& t = PesqTables::builtin();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t frames = 30;
  std::vector<BarkFrame> c(frames), n(frames);
  for (std::size_t m = 0; m < frames; ++m)
    for (std::size_t i = 0; i < 49; ++i) {
      c[m][i] = t.hearing_threshold[i] * std::pow(10.0, 4.0 * u(rng) - 1.0);
      n[m][i] = t.hearing_threshold[i] * std::pow(10.0, 4.0 * u(rng) - 1.0);
    }
  const Equalized e = tf_equalize(c, n, t);

  BarkFrame ratio{};
  for (std::size_t i = 0; i < 49; ++i) {
    double pc = 0.0, pn = 0.0;
    for (std::size_t m = 0; m < frames; ++m) {
      if (c[m][i] > 100.0 * t.hearing_threshold[i]) pc += c[m][i];
      if (n[m][i] > 100.0 * t.hearing_threshold[i]) pn += n[m][i];
    }
    ratio[i] = (pn / frames + 1000.0) / (pc / frames + 1000.0);
    CHECK(e.band_ratio[i] == doctest::Approx(ratio[i]).epsilon(1e-12));
  }
  double prev = 0.0;
  for (std::size_t m = 0; m < frames; ++m) {
    double ac = 0.0, an = 0.0;
    for (std::size_t i = 1; i < 49; ++i) {
      const double ec = ratio[i] * c[m][i];
      if (ec > t.hearing_threshold[i]) ac += ec;
      if (n[m][i] > t.hearing_threshold[i]) an += n[m][i];
    }
    const double raw = (ac + 1000.0) / (an + 1000.0);
    const double smooth = m == 0 ? raw : 0.2 * prev + 0.8 * raw;
    prev = smooth;
    const double gain = std::clamp(smooth, 3e-4, 5.0);
    CHECK(e.frame_gain[m] == doctest::Approx(gain).epsilon(1e-12));
    for (std::size_t i = 0; i < 49; ++i) {
      CHECK(e.clean[m][i] == doctest::Approx(ratio[i] * c[m][i]).epsilon(1e-12));
      CHECK(e.noisy[m][i] == doctest::Approx(gain * n[m][i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("aggregation matches a brute-force recomputation") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::uniform_int_distribution<std::size_t> len(20, 200);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = len(rng);
    std::vector<double> fd(n), afd(n);
    for (std::size_t i = 0; i < n; ++i) {
      fd[i] = u(rng);
      afd[i] = 10.0 * u(rng);
    }
    const PesqBreakdown b = aggregate(fd, afd);
    const double ds = brute_psqm(fd);
    const double da = brute_psqm(afd);
    CHECK(std::abs(b.d_sym - ds) <= 1e-12 * ds);
    CHECK(std::abs(b.d_asym - da) <= 1e-12 * da);
    CHECK(std::abs(b.value - (4.5 - 0.1 * ds - 0.0309 * da)) <= 1e-12);
  }
  CHECK_THROWS_AS(psqm_average(std::vector<double>(19, 1.0)), InvalidArgument);
}

TEST_CASE("batch aggregation averages the disturbances first") {
  PesqBreakdown a, b;
  a.d_sym = 1.0;
  a.d_asym = 4.0;
  b.d_sym = 3.0;
  b.d_asym = 2.0;
  const std::vector<PesqBreakdown> batch{a, b};
  CHECK(aggregate_batch(batch) == doctest::Approx(4.5 - 0.1 * 2.0 - 0.0309 * 3.0));
}

TEST_CASE("frame disturbances by direct summation") {
  const auto& t = PesqTables::builtin();
  const auto x = clean_proxy(9, 1.0);
  const auto y = noisy_copy(x, 5.0, 10);
  const auto c = bark_spectrum(stft(level_align(x)), t);
  const auto n = bark_spectrum(stft(level_align(y)), t);
  const Equalized e = tf_equalize(c, n, t);
  const auto d = disturbance(loudness(e.clean, t), loudness(e.noisy, t));
  const auto fd = frame_disturbances(d, c, n, t);
  double wsum = 0.0;
  for (double w : t.band_weight) wsum += w;
  for (std::size_t m = 0; m < c.size(); m += 7) {
    double s = 0.0, a = 0.0;
    for (std::size_t i = 0; i < 49; ++i) {
      const double wd = t.band_weight[i] * d[m][i];
      const double h = asymmetry_factor(c[m][i], n[m][i]);
      s += wd * wd;
      a += wd * wd * h * h;
    }
    CHECK(fd.symmetric[m] == doctest::Approx(std::sqrt(s / wsum)).epsilon(1e-12));
    CHECK(fd.asymmetric[m] == doctest::Approx(std::sqrt(a / wsum)).epsilon(1e-12));
  }
  const PesqBreakdown full = loss_pesq(x, y);
  const PesqBreakdown staged = aggregate(fd.symmetric, fd.asymmetric);
  CHECK(full.value == doctest::Approx(staged.value).epsilon(1e-12));
}

TEST_CASE("loss_pesq fixed point, range and monotonicity") {
  const auto x = clean_proxy(1);
  CHECK(loss_pesq(x, x).value == doctest::Approx(4.5).epsilon(1e-12));
  double prev = -1e9;
  for (double snr : {-10.0, -5.0, 0.0, 5.0, 10.0, 15.0}) {
    const double v = loss_pesq(x, noisy_copy(x, snr, 2)).value;
    CHECK(v < 4.5);
    CHECK(v > prev);
    prev = v;
  }
  // Level alignment makes the score insensitive to overall gain.
  const auto y = noisy_copy(x, 0.0, 3);
  std::vector<double> loud(y);
  for (double& v : loud) v *= 8.0;
  CHECK(loss_pesq(x, loud).value == doctest::Approx(loss_pesq(x, y).value).epsilon(1e-9));
}

TEST_CASE("loss_pesq argument errors") {
  const auto x = clean_proxy(1, 1.0);
  CHECK_THROWS_AS(loss_pesq(x, std::vector<double>(x.size() - 1, 0.1)), InvalidArgument);
  const auto short_x = clean_proxy(1, 0.2);  // 13 frames
  CHECK_THROWS_AS(loss_pesq(short_x, short_x), InvalidArgument);
}

TEST_CASE("PesqObjective agrees with loss_pesq and finite differences") {
  const auto x = clean_proxy(12, 1.0);
  const auto y = noisy_copy(x, 10.0, 13);
  const PesqObjective obj(x);
  CHECK(obj.evaluate(y, false).value == loss_pesq(x, y).value);
  const auto coords = generic_coordinates(obj, y, 64, 1e-6, 12);
  const auto rep = finite_diff_check(obj, y, coords, 1e-6);
  CAPTURE(rep.worst_index);
  CHECK(rep.max_rel_error < 1e-4);
}
