#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "percloss/masklab.hpp"
#include "percloss/synth.hpp"

namespace percloss {

struct ExperimentConfig {
  std::vector<double> snrs{-10.0, -5.0, 0.0, 5.0, 10.0, 15.0};
  std::vector<LossKind> refine_losses{LossKind::Sdr, LossKind::SdrPesq,
                                      LossKind::SdrPesqStoi};
  CombinationWeights weights{};
  std::size_t steps = 300;
  double step_size = 0.5;
  std::uint64_t seed = 1;
  NoiseType noise = NoiseType::White;
  double duration_s = 0.0;  // 0: drawn from the seed
};

struct ReportRow {
  std::string condition;  // noisy, IAM, PSM, refine-<loss>
  double snr_db = 0.0;
  double si_sdr_db = 0.0;
  double pesq_loss = 0.0;
  double stoi_loss = 0.0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
};

struct TrendCheck {
  std::string claim;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::vector<ReportRow> rows;
  std::vector<TrendCheck> trends;
};

inline constexpr const char* kReportHeader =
    "Oracle IAM and PSM rows use the clean reference and bound trained mask "
    "estimators from above; compare directions, not absolute values.";

// Scores one (clean, estimate) pair into a row.
ReportRow score_row(std::string condition, double snr_db,
                    std::span<const double> clean, std::span<const double> estimate,
                    std::size_t steps, std::uint64_t seed,
                    const PesqTables& tables = PesqTables::builtin());

// Rows noisy, IAM, PSM for one mixture.
std::vector<ReportRow> oracle_report(std::span<const double> clean,
                                     std::span<const double> noise,
                                     std::span<const double> snrs, std::uint64_t seed,
                                     const PesqTables& tables = PesqTables::builtin());

// Full grid: oracle rows plus one refine row per loss, for every SNR, and the
// directional trend checks. `progress` receives a line per finished cell.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const PesqTables& tables = PesqTables::builtin(),
                                const std::function<void(const std::string&)>& progress = {});

std::string condition_name(LossKind refine_loss);

// Seeded generic point for gradient checks: a 1 s clean proxy and the same
// proxy with white noise at 10 dB SNR.
struct GradcheckPair {
  std::vector<double> clean;
  std::vector<double> estimate;
};
GradcheckPair gradcheck_pair(std::uint64_t seed);

// finite_diff_check of `loss` on gradcheck_pair(seed) over `coordinates`
// generic coordinates.
FiniteDiffReport run_gradcheck(LossKind loss, const CombinationWeights& weights,
                               std::uint64_t seed, std::size_t coordinates = 64,
                               double step = 1e-6,
                               const PesqTables& tables = PesqTables::builtin());

// CSV with columns condition,snr_db,si_sdr_db,pesq_loss,stoi_loss,steps,seed
// and 6 significant digits.
std::string to_csv(const ExperimentResult& result);
// JSON summary at full precision: header note, config, rows, trends.
std::string to_json(const ExperimentResult& result, const ExperimentConfig& config);

}  // namespace percloss
