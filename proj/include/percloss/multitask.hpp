#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "percloss/gradient.hpp"
#include "percloss/pesq.hpp"

namespace percloss {

struct CombinationWeights {
  double alpha = 1.0;  // PESQ weight
  double beta = 1.0;   // STOI weight
};

// Throws InvalidArgument unless both weights are finite and >= 0.
void validate(const CombinationWeights& w);

enum class LossKind { Sdr, Pesq, Stoi, SdrPesq, SdrStoi, SdrPesqStoi };

inline constexpr LossKind kAllLossKinds[] = {LossKind::Sdr,     LossKind::Pesq,
                                             LossKind::Stoi,    LossKind::SdrPesq,
                                             LossKind::SdrStoi, LossKind::SdrPesqStoi};

std::string_view loss_name(LossKind kind);
std::optional<LossKind> parse_loss_name(std::string_view name);

double loss_sdr_pesq(std::span<const double> clean, std::span<const double> estimate,
                     double alpha, const PesqTables& tables = PesqTables::builtin());
double loss_sdr_stoi(std::span<const double> clean, std::span<const double> estimate,
                     double beta);
double loss_sdr_pesq_stoi(std::span<const double> clean,
                          std::span<const double> estimate,
                          const CombinationWeights& weights,
                          const PesqTables& tables = PesqTables::builtin());

// sum_i weight_i * term_i. Terms must share the input length.
class WeightedSum final : public Objective {
 public:
  struct Term {
    double weight;
    std::shared_ptr<const Objective> objective;
  };
  WeightedSum(std::string name, std::vector<Term> terms);
  std::string name() const override { return name_; }
  std::size_t input_length() const override { return length_; }
  Evaluation evaluate(std::span<const double> estimate,
                      bool want_gradient) const override;

 private:
  std::string name_;
  std::vector<Term> terms_;
  std::size_t length_;
};

// The objective for `kind`, bound to `clean`. Terms with zero weight are
// still evaluated so that reductions hold exactly.
std::unique_ptr<Objective> make_objective(LossKind kind, std::vector<double> clean,
                                          const CombinationWeights& weights = {},
                                          const PesqTables& tables = PesqTables::builtin());

}  // namespace percloss
