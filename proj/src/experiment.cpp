#include "percloss/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "percloss/errors.hpp"
#include "percloss/pesq.hpp"
#include "percloss/sdr.hpp"
#include "percloss/stoi.hpp"

namespace percloss {

namespace {

std::string sig6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string snr_label(double snr) { return sig6(snr) + " dB"; }

const ReportRow* find_row(const std::vector<ReportRow>& rows, const std::string& cond,
                          double snr) {
  for (const auto& r : rows)
    if (r.condition == cond && r.snr_db == snr) return &r;
  return nullptr;
}

void check_config(const ExperimentConfig& c) {
  if (c.snrs.empty()) throw InvalidArgument("experiment needs at least one SNR");
  for (double s : c.snrs)
    if (!std::isfinite(s)) throw InvalidArgument("SNR values must be finite");
  validate(c.weights);
  if (!(c.step_size > 0.0) || !std::isfinite(c.step_size))
    throw InvalidArgument("step size must be positive");
}

}  // namespace

std::string condition_name(LossKind refine_loss) {
  std::string name = "refine-";
  for (char ch : loss_name(refine_loss))
    name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return name;
}

ReportRow score_row(std::string condition, double snr_db, std::span<const double> clean,
                    std::span<const double> estimate, std::size_t steps,
                    std::uint64_t seed, const PesqTables& tables) {
  ReportRow r;
  r.condition = std::move(condition);
  r.snr_db = snr_db;
  r.si_sdr_db = si_sdr(clean, estimate).db;
  r.pesq_loss = loss_pesq(clean, estimate, tables).value;
  r.stoi_loss = loss_stoi(clean, estimate).value;
  r.steps = steps;
  r.seed = seed;
  return r;
}

std::vector<ReportRow> oracle_report(std::span<const double> clean,
                                     std::span<const double> noise,
                                     std::span<const double> snrs, std::uint64_t seed,
                                     const PesqTables& tables) {
  std::vector<ReportRow> rows;
  const Spectrogram x = stft(clean);
  for (double snr : snrs) {
    const Mixture mix = mix_at_snr(clean, noise, snr);
    const Spectrogram y = stft(mix.noisy);
    rows.push_back(score_row("noisy", snr, clean, mix.noisy, 0, seed, tables));
    rows.push_back(score_row("IAM", snr, clean, apply_mask(y, oracle_iam(x, y)), 0,
                             seed, tables));
    rows.push_back(score_row("PSM", snr, clean, apply_mask(y, oracle_psm(x, y)), 0,
                             seed, tables));
  }
  return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const PesqTables& tables,
                                const std::function<void(const std::string&)>& progress) {
  check_config(config);
  const std::vector<double> clean = clean_proxy(config.seed, config.duration_s);
  const std::vector<double> noise = make_noise(config.noise, clean.size(), config.seed + 1);

  ExperimentResult result;
  result.rows = oracle_report(clean, noise, config.snrs, config.seed, tables);
  if (progress) progress("oracle rows done");

  RefineOptions opts;
  opts.weights = config.weights;
  opts.steps = config.steps;
  opts.step_size = config.step_size;
  for (double snr : config.snrs) {
    const Mixture mix = mix_at_snr(clean, noise, snr);
    for (LossKind loss : config.refine_losses) {
      opts.loss = loss;
      const RefineResult r = refine_mixture(clean, mix.noisy, opts, tables);
      result.rows.push_back(score_row(condition_name(loss), snr, clean, r.denoised,
                                      config.steps, config.seed, tables));
      if (progress) progress(condition_name(loss) + " at " + snr_label(snr) + " done");
    }
  }

  // Directional claims.
  {
    TrendCheck t{"PSM si_sdr >= IAM si_sdr at every SNR", true, ""};
    for (double snr : config.snrs) {
      const auto* iam = find_row(result.rows, "IAM", snr);
      const auto* psm = find_row(result.rows, "PSM", snr);
      if (psm->si_sdr_db < iam->si_sdr_db) {
        t.passed = false;
        t.detail += "fails at " + snr_label(snr) + "; ";
      }
    }
    result.trends.push_back(t);
  }
  const auto has = [&](LossKind k) {
    for (LossKind l : config.refine_losses)
      if (l == k) return true;
    return false;
  };
  if (has(LossKind::Sdr) && has(LossKind::SdrPesq)) {
    TrendCheck t{"refine-SDR-PESQ pesq_loss > refine-SDR pesq_loss at every SNR", true, ""};
    for (double snr : config.snrs) {
      const auto* a = find_row(result.rows, condition_name(LossKind::SdrPesq), snr);
      const auto* b = find_row(result.rows, condition_name(LossKind::Sdr), snr);
      if (!(a->pesq_loss > b->pesq_loss)) {
        t.passed = false;
        t.detail += "fails at " + snr_label(snr) + "; ";
      }
    }
    result.trends.push_back(t);
  }
  if (has(LossKind::Sdr)) {
    for (double snr : config.snrs) {
      if (snr != 0.0) continue;
      const auto* noisy = find_row(result.rows, "noisy", snr);
      const auto* ref = find_row(result.rows, condition_name(LossKind::Sdr), snr);
      const double gain = ref->si_sdr_db - noisy->si_sdr_db;
      result.trends.push_back({"refine-SDR improves si_sdr by >= 5 dB at 0 dB SNR",
                               gain >= 5.0, "improvement " + sig6(gain) + " dB"});
    }
  }
  {
    TrendCheck t{"noisy si_sdr, pesq_loss, stoi_loss strictly increase with SNR", true, ""};
    std::vector<double> sorted = config.snrs;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      const auto* lo = find_row(result.rows, "noisy", sorted[i - 1]);
      const auto* hi = find_row(result.rows, "noisy", sorted[i]);
      if (!(hi->si_sdr_db > lo->si_sdr_db && hi->pesq_loss > lo->pesq_loss &&
            hi->stoi_loss > lo->stoi_loss)) {
        t.passed = false;
        t.detail += "fails between " + snr_label(sorted[i - 1]) + " and " +
                    snr_label(sorted[i]) + "; ";
      }
    }
    result.trends.push_back(t);
  }
  return result;
}

GradcheckPair gradcheck_pair(std::uint64_t seed) {
  GradcheckPair p;
  p.clean = clean_proxy(seed, 1.0);
  const auto noise = make_noise(NoiseType::White, p.clean.size(), seed + 7);
  p.estimate = mix_at_snr(p.clean, noise, 10.0).noisy;
  return p;
}

FiniteDiffReport run_gradcheck(LossKind loss, const CombinationWeights& weights,
                               std::uint64_t seed, std::size_t coordinates,
                               double step, const PesqTables& tables) {
  const GradcheckPair p = gradcheck_pair(seed);
  const auto objective = make_objective(loss, p.clean, weights, tables);
  const auto coords =
      generic_coordinates(*objective, p.estimate, coordinates, step, seed);
  return finite_diff_check(*objective, p.estimate, coords, step);
}

std::string to_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "condition,snr_db,si_sdr_db,pesq_loss,stoi_loss,steps,seed\n";
  for (const auto& r : result.rows)
    out << r.condition << ',' << sig6(r.snr_db) << ',' << sig6(r.si_sdr_db) << ','
        << sig6(r.pesq_loss) << ',' << sig6(r.stoi_loss) << ',' << r.steps << ','
        << r.seed << '\n';
  return out.str();
}

std::string to_json(const ExperimentResult& result, const ExperimentConfig& config) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["header"] = kReportHeader;
  ordered_json cfg;
  cfg["snrs"] = config.snrs;
  std::vector<std::string> losses;
  for (LossKind k : config.refine_losses) losses.emplace_back(loss_name(k));
  cfg["refine_losses"] = losses;
  cfg["alpha"] = config.weights.alpha;
  cfg["beta"] = config.weights.beta;
  cfg["steps"] = config.steps;
  cfg["step_size"] = config.step_size;
  cfg["seed"] = config.seed;
  cfg["noise"] = noise_name(config.noise);
  cfg["duration_s"] = config.duration_s;
  j["config"] = cfg;
  ordered_json rows = ordered_json::array();
  for (const auto& r : result.rows) {
    ordered_json row;
    row["condition"] = r.condition;
    row["snr_db"] = r.snr_db;
    row["si_sdr_db"] = r.si_sdr_db;
    row["pesq_loss"] = r.pesq_loss;
    row["stoi_loss"] = r.stoi_loss;
    row["steps"] = r.steps;
    row["seed"] = r.seed;
    rows.push_back(row);
  }
  j["rows"] = rows;
  ordered_json trends = ordered_json::array();
  bool all = true;
  for (const auto& t : result.trends) {
    trends.push_back({{"claim", t.claim}, {"passed", t.passed}, {"detail", t.detail}});
    all = all && t.passed;
  }
  j["trends"] = trends;
  j["all_trends_passed"] = all;
  return j.dump(2) + "\n";
}

}  // namespace percloss
