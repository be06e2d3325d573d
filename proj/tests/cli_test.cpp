#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli_run.hpp"
#include "helpers.hpp"
#include "percloss/experiment.hpp"
#include "percloss/multitask.hpp"
#include "percloss/pesq.hpp"
#include "percloss/sdr.hpp"
#include "percloss/signal.hpp"
#include "percloss/stoi.hpp"
#include "percloss/synth.hpp"

using namespace percloss;
using testing::run_cli;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("help, version and usage errors") {
  CHECK(run_cli("--help >/dev/null").exit_code == 0);
  CHECK(run_cli("score --help >/dev/null").exit_code == 0);
  CHECK(run_cli("--version").out.find('.') != std::string::npos);
  CHECK(run_cli("2>/dev/null").exit_code == 2);
  CHECK(run_cli("gradcheck mse 2>/dev/null").exit_code == 2);
  CHECK(run_cli("experiment --noise brown 2>/dev/null").exit_code == 2);
  CHECK(run_cli("score a.wav 2>/dev/null").exit_code == 2);
  CHECK(run_cli("score a.wav b.wav --alpha -1 2>/dev/null").exit_code == 2);
}

TEST_CASE("score reports library values") {
  const auto dir = testing::temp_dir("cliscore");
  const auto x = clean_proxy(21, 1.5);
  const auto y = mix_at_snr(x, make_noise(NoiseType::Pink, x.size(), 22), 5.0).noisy;
  save_wav_float(dir / "c.wav", Signal{x});
  save_wav_float(dir / "d.wav", Signal{y});
  // Library values on the float-quantized samples the CLI reads.
  const auto xc = load_wav(dir / "c.wav").samples;
  const auto yc = load_wav(dir / "d.wav").samples;

  const auto r = run_cli("score " + q(dir / "c.wav") + " " + q(dir / "d.wav") +
                         " --alpha 0.5 --beta 2 --format json");
  REQUIRE(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["si_sdr_db"].get<double>() == si_sdr(xc, yc).db);
  CHECK(j["pesq_loss"].get<double>() == loss_pesq(xc, yc).value);
  CHECK(j["stoi_loss"].get<double>() == loss_stoi(xc, yc).value);
  CHECK(j["sdr_pesq_stoi"].get<double>() ==
        doctest::Approx(loss_sdr_pesq_stoi(xc, yc, {0.5, 2.0})).epsilon(1e-14));

  const auto self = run_cli("score " + q(dir / "c.wav") + " " + q(dir / "c.wav"));
  REQUIRE(self.exit_code == 0);
  CHECK(self.out.find("\n120,4.5,0,0,1,") != std::string::npos);

  {
    std::ofstream bad(dir / "bad.wav", std::ios::binary);
    bad << "RIFF0000WAVEfmt nonsense";
  }
  CHECK(run_cli("score " + q(dir / "c.wav") + " " + q(dir / "bad.wav") + " 2>/dev/null")
            .exit_code == 1);
  CHECK(run_cli("score " + q(dir / "c.wav") + " " + q(dir / "none.wav") + " 2>/dev/null")
            .exit_code == 1);

  // Length mismatch: truncated with a warning.
  save_wav_float(dir / "short.wav", Signal{std::vector<double>(y.begin(), y.end() - 100)});
  const auto t = run_cli("score " + q(dir / "c.wav") + " " + q(dir / "short.wav") +
                         " 2>&1 >/dev/null");
  CHECK(t.exit_code == 0);
  CHECK(t.out.find("truncating") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mix writes the requested SNR") {
  const auto dir = testing::temp_dir("climix");
  const auto x = clean_proxy(23, 1.0);
  const auto n = make_noise(NoiseType::Babble, x.size(), 24);
  save_wav_float(dir / "c.wav", Signal{x});
  save_wav_float(dir / "n.wav", Signal{n});
  const auto r = run_cli("mix " + q(dir / "c.wav") + " " + q(dir / "n.wav") +
                         " --snr 3.5 --out " + q(dir / "m.wav"));
  REQUIRE(r.exit_code == 0);
  const auto xc = load_wav(dir / "c.wav").samples;
  const auto nc = load_wav(dir / "n.wav").samples;
  const auto m = load_wav(dir / "m.wav").samples;
  REQUIRE(m.size() == x.size());
  double ex = 0.0, en = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    ex += xc[i] * xc[i];
    en += (m[i] - xc[i]) * (m[i] - xc[i]);
  }
  CAPTURE(10.0 * std::log10(ex / en) - 3.5);
  CHECK(std::abs(10.0 * std::log10(ex / en) - 3.5) < 1e-6);
  // The mixture written equals the library mixture up to float rounding.
  const auto lib = mix_at_snr(xc, nc, 3.5).noisy;
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(m[i] == double(float(lib[i])));
  std::filesystem::remove_all(dir);
}

TEST_CASE("gradcheck subcommand") {
  const auto r = run_cli("gradcheck sdr --seed 3 --coords 8");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("over 8 coordinates") != std::string::npos);
}

TEST_CASE("experiment output is byte-identical across runs and matches the library") {
  const auto dir = testing::temp_dir("cliexp");
  const std::string args = "experiment --snr 0,10 --steps 4 --duration 1 --seed 5 --out ";
  const auto a = run_cli(args + q(dir / "a") + " 2>/dev/null");
  const auto b = run_cli(args + q(dir / "b") + " 2>/dev/null");
  CHECK((a.exit_code == 0 || a.exit_code == 1));
  CHECK(a.exit_code == b.exit_code);
  const std::string csv = slurp(dir / "a.csv");
  CHECK(csv == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));

  ExperimentConfig c;
  c.snrs = {0.0, 10.0};
  c.steps = 4;
  c.duration_s = 1.0;
  c.seed = 5;
  const auto lib = run_experiment(c);
  CHECK(csv == to_csv(lib));
  CHECK(slurp(dir / "a.json") == to_json(lib, c));

  const auto stdout_csv = run_cli("experiment --snr 0,10 --steps 4 --duration 1 --seed 5 2>/dev/null");
  CHECK(stdout_csv.out == csv);
  std::filesystem::remove_all(dir);
}
