#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "percloss/percloss.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct ContextDeleter {
  void operator()(pl_context* c) const { pl_context_destroy(c); }
};
struct SignalDeleter {
  void operator()(pl_signal* s) const { pl_signal_destroy(s); }
};
struct ExperimentDeleter {
  void operator()(pl_experiment* e) const { pl_experiment_destroy(e); }
};
using Context = std::unique_ptr<pl_context, ContextDeleter>;
using SignalHandle = std::unique_ptr<pl_signal, SignalDeleter>;
using ExperimentHandle = std::unique_ptr<pl_experiment, ExperimentDeleter>;

std::string sig6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void flush_warnings(pl_context* ctx) {
  for (size_t i = 0; i < pl_warning_count(ctx); ++i)
    std::cerr << "warning: " << pl_warning(ctx, i) << '\n';
  pl_clear_warnings(ctx);
}

int report(pl_context* ctx, pl_status s) {
  flush_warnings(ctx);
  std::cerr << "error: " << pl_status_string(s) << ": " << pl_last_error(ctx) << '\n';
  return kExitFailure;
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

struct Options {
  std::string clean;
  std::string other;
  double alpha = 1.0;
  double beta = 1.0;
  std::vector<double> snrs{-10.0, -5.0, 0.0, 5.0, 10.0, 15.0};
  std::size_t steps = 300;
  double step_size = 0.5;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "csv";
  std::string loss;
  std::string noise = "white";
  std::size_t coordinates = 64;
  double fd_step = 1e-6;
  double duration = 0.0;
};

int cmd_score(pl_context* ctx, const Options& o) {
  pl_signal* raw = nullptr;
  pl_status s = pl_signal_load_wav(ctx, o.clean.c_str(), &raw);
  if (s != PL_OK) return report(ctx, s);
  SignalHandle clean(raw);
  s = pl_signal_load_wav(ctx, o.other.c_str(), &raw);
  if (s != PL_OK) return report(ctx, s);
  SignalHandle degraded(raw);

  const size_t lc = pl_signal_length(clean.get());
  const size_t ld = pl_signal_length(degraded.get());
  if (lc != ld) {
    const size_t n = std::min(lc, ld);
    std::cerr << "warning: lengths differ (" << lc << " vs " << ld
              << " samples); truncating both to " << n << '\n';
    pl_signal_truncate(ctx, clean.get(), n);
    pl_signal_truncate(ctx, degraded.get(), n);
  }

  pl_score_report r{};
  s = pl_score(ctx, clean.get(), degraded.get(), {o.alpha, o.beta}, &r);
  if (s != PL_OK) return report(ctx, s);
  flush_warnings(ctx);

  if (o.format == "json") {
    nlohmann::ordered_json j;
    j["si_sdr_db"] = r.si_sdr_db;
    j["si_sdr_clamped"] = r.si_sdr_clamped != 0;
    j["pesq_loss"] = r.pesq_loss;
    j["d_sym"] = r.d_sym;
    j["d_asym"] = r.d_asym;
    j["stoi_loss"] = r.stoi_loss;
    j["alpha"] = o.alpha;
    j["beta"] = o.beta;
    j["sdr_pesq"] = r.sdr_pesq;
    j["sdr_stoi"] = r.sdr_stoi;
    j["sdr_pesq_stoi"] = r.sdr_pesq_stoi;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "si_sdr_db,pesq_loss,d_sym,d_asym,stoi_loss,sdr_pesq,sdr_stoi,"
                 "sdr_pesq_stoi\n"
              << sig6(r.si_sdr_db) << ',' << sig6(r.pesq_loss) << ','
              << sig6(r.d_sym) << ',' << sig6(r.d_asym) << ',' << sig6(r.stoi_loss)
              << ',' << sig6(r.sdr_pesq) << ',' << sig6(r.sdr_stoi) << ','
              << sig6(r.sdr_pesq_stoi) << '\n';
  }
  return kExitOk;
}

int cmd_mix(pl_context* ctx, const Options& o) {
  pl_signal* raw = nullptr;
  pl_status s = pl_signal_load_wav(ctx, o.clean.c_str(), &raw);
  if (s != PL_OK) return report(ctx, s);
  SignalHandle clean(raw);
  s = pl_signal_load_wav(ctx, o.other.c_str(), &raw);
  if (s != PL_OK) return report(ctx, s);
  SignalHandle noise(raw);

  double gain = 0.0;
  s = pl_mix_at_snr(ctx, clean.get(), noise.get(), o.snrs.front(), &raw, &gain);
  if (s != PL_OK) return report(ctx, s);
  SignalHandle mixed(raw);
  s = pl_signal_save_wav(ctx, mixed.get(), o.out.c_str());
  if (s != PL_OK) return report(ctx, s);
  flush_warnings(ctx);
  std::cout << "noise_gain " << sig6(gain) << '\n';
  return kExitOk;
}

int cmd_gradcheck(pl_context* ctx, const Options& o) {
  pl_loss loss{};
  if (pl_loss_from_name(o.loss.c_str(), &loss) != PL_OK) {
    std::cerr << "error: unknown loss '" << o.loss << "'\n";
    return kExitUsage;
  }
  pl_gradcheck_report r{};
  const pl_status s =
      pl_gradcheck(ctx, loss, {o.alpha, o.beta}, o.seed, o.coordinates, o.fd_step, &r);
  if (s != PL_OK) return report(ctx, s);
  const bool pass = r.max_rel_error < 1e-4;
  std::cout << o.loss << ": max relative error " << sig6(r.max_rel_error)
            << " over " << r.coordinates << " coordinates (worst index "
            << r.worst_index << ", analytic " << sig6(r.analytic) << ", numeric "
            << sig6(r.numeric) << ") " << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kExitOk : kExitFailure;
}

int cmd_experiment(pl_context* ctx, const Options& o) {
  pl_experiment_config cfg;
  pl_experiment_config_default(&cfg);
  cfg.snrs = o.snrs.data();
  cfg.snr_count = o.snrs.size();
  cfg.weights = {o.alpha, o.beta};
  cfg.steps = o.steps;
  cfg.step_size = o.step_size;
  cfg.seed = o.seed;
  cfg.noise = o.noise.c_str();
  cfg.duration_s = o.duration;

  pl_experiment* raw = nullptr;
  const pl_status s = pl_experiment_run(ctx, &cfg, &raw);
  if (s != PL_OK) return report(ctx, s);
  ExperimentHandle exp(raw);
  flush_warnings(ctx);

  const std::string csv = pl_experiment_csv(exp.get());
  const std::string json = pl_experiment_json(exp.get());
  if (o.out.empty()) {
    std::cout << (o.format == "json" ? json : csv);
  } else {
    if (!write_file(o.out + ".csv", csv) || !write_file(o.out + ".json", json)) {
      std::cerr << "error: cannot write report files at " << o.out << '\n';
      return kExitFailure;
    }
    std::cout << "wrote " << o.out << ".csv and " << o.out << ".json\n";
  }
  if (!pl_experiment_trends_passed(exp.get())) {
    std::cerr << "trend check failed; see the JSON summary\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable perceptual speech losses: score, mix, gradcheck, "
               "experiment.\nPESQ tables: $PERCLOSS_PESQ_TABLES overrides the built-in "
               "copy."};
  app.set_version_flag("--version", pl_version());
  app.require_subcommand(1);
  Options o;

  const auto add_weights = [&](CLI::App* cmd) {
    cmd->add_option("--alpha", o.alpha, "PESQ weight")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--beta", o.beta, "STOI weight")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
  };
  const auto add_format = [&](CLI::App* cmd) {
    cmd->add_option("--format", o.format, "output format")
        ->capture_default_str()
        ->check(CLI::IsMember({"csv", "json"}));
  };

  auto* score = app.add_subcommand("score", "score a degraded WAV against a clean one");
  score->add_option("clean", o.clean, "clean 16 kHz WAV")->required();
  score->add_option("degraded", o.other, "degraded 16 kHz WAV")->required();
  add_weights(score);
  add_format(score);

  auto* mix = app.add_subcommand("mix", "mix clean and noise at an SNR");
  mix->add_option("clean", o.clean, "clean 16 kHz WAV")->required();
  mix->add_option("noise", o.other, "noise 16 kHz WAV, same length")->required();
  mix->add_option("--snr", o.snrs, "SNR in dB")->required()->expected(1);
  mix->add_option("--out", o.out, "output float-32 WAV")->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of a loss");
  grad->add_option("loss", o.loss, "sdr, pesq, stoi, sdr-pesq, sdr-stoi, sdr-pesq-stoi")
      ->required()
      ->check(CLI::IsMember({"sdr", "pesq", "stoi", "sdr-pesq", "sdr-stoi",
                             "sdr-pesq-stoi"}));
  grad->add_option("--seed", o.seed, "synthetic pair seed")->capture_default_str();
  grad->add_option("--coords", o.coordinates, "coordinates to check")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  grad->add_option("--step", o.fd_step, "central-difference step")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_weights(grad);

  auto* exp = app.add_subcommand("experiment", "oracle and refine grid on the synthetic suite");
  exp->add_option("--snr", o.snrs, "SNR grid in dB")->capture_default_str()->delimiter(',');
  exp->add_option("--steps", o.steps, "refine steps")->capture_default_str();
  exp->add_option("--step-size", o.step_size, "initial refine step size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  exp->add_option("--seed", o.seed, "suite seed")->capture_default_str();
  exp->add_option("--noise", o.noise, "noise type")
      ->capture_default_str()
      ->check(CLI::IsMember({"white", "pink", "babble"}));
  exp->add_option("--duration", o.duration, "clean length in s (0: from seed)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  exp->add_option("--out", o.out, "write <out>.csv and <out>.json instead of stdout");
  add_weights(exp);
  add_format(exp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  pl_context* raw = nullptr;
  const pl_status s = pl_context_create(nullptr, &raw);
  Context ctx(raw);
  if (!ctx) {
    std::cerr << "error: cannot create context\n";
    return kExitFailure;
  }
  if (s != PL_OK) return report(ctx.get(), s);

  if (*score) return cmd_score(ctx.get(), o);
  if (*mix) return cmd_mix(ctx.get(), o);
  if (*grad) return cmd_gradcheck(ctx.get(), o);
  return cmd_experiment(ctx.get(), o);
}
