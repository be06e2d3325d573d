#include "percloss/multitask.hpp"

#include <cmath>

#include "percloss/errors.hpp"
#include "percloss/sdr.hpp"
#include "percloss/stoi.hpp"

namespace percloss {

void validate(const CombinationWeights& w) {
  if (!(std::isfinite(w.alpha) && w.alpha >= 0.0))
    throw InvalidArgument("alpha must be finite and >= 0");
  if (!(std::isfinite(w.beta) && w.beta >= 0.0))
    throw InvalidArgument("beta must be finite and >= 0");
}

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::Sdr: return "sdr";
    case LossKind::Pesq: return "pesq";
    case LossKind::Stoi: return "stoi";
    case LossKind::SdrPesq: return "sdr-pesq";
    case LossKind::SdrStoi: return "sdr-stoi";
    case LossKind::SdrPesqStoi: return "sdr-pesq-stoi";
  }
  return "unknown";
}

std::optional<LossKind> parse_loss_name(std::string_view name) {
  for (LossKind k : kAllLossKinds)
    if (loss_name(k) == name) return k;
  return std::nullopt;
}

double loss_sdr_pesq(std::span<const double> clean, std::span<const double> estimate,
                     double alpha, const PesqTables& tables) {
  validate({alpha, 0.0});
  return si_sdr(clean, estimate).db + alpha * loss_pesq(clean, estimate, tables).value;
}

double loss_sdr_stoi(std::span<const double> clean, std::span<const double> estimate,
                     double beta) {
  validate({0.0, beta});
  return si_sdr(clean, estimate).db + beta * loss_stoi(clean, estimate).value;
}

double loss_sdr_pesq_stoi(std::span<const double> clean,
                          std::span<const double> estimate,
                          const CombinationWeights& weights,
                          const PesqTables& tables) {
  validate(weights);
  return si_sdr(clean, estimate).db +
         weights.alpha * loss_pesq(clean, estimate, tables).value +
         weights.beta * loss_stoi(clean, estimate).value;
}

WeightedSum::WeightedSum(std::string name, std::vector<Term> terms)
    : name_(std::move(name)), terms_(std::move(terms)) {
  if (terms_.empty()) throw InvalidArgument("weighted sum needs at least one term");
  length_ = terms_.front().objective->input_length();
  for (const auto& t : terms_) {
    if (t.objective->input_length() != length_)
      throw InvalidArgument("weighted sum terms differ in input length");
    if (!std::isfinite(t.weight)) throw InvalidArgument("non-finite weight");
  }
}

Evaluation WeightedSum::evaluate(std::span<const double> estimate,
                                 bool want_gradient) const {
  Evaluation out;
  BranchTrace branches;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const Evaluation e = terms_[i].objective->evaluate(estimate, want_gradient);
    const double w = terms_[i].weight;
    out.value += w * e.value;
    branches.record_choice(static_cast<unsigned>(e.branches & 0xffffffffu));
    branches.record_choice(static_cast<unsigned>(e.branches >> 32));
    if (!want_gradient) continue;
    if (i == 0) {
      out.gradient.resize(e.gradient.size());
      for (std::size_t n = 0; n < e.gradient.size(); ++n)
        out.gradient[n] = w * e.gradient[n];
    } else {
      for (std::size_t n = 0; n < e.gradient.size(); ++n)
        out.gradient[n] += w * e.gradient[n];
    }
  }
  out.branches = branches.digest();
  return out;
}

std::unique_ptr<Objective> make_objective(LossKind kind, std::vector<double> clean,
                                          const CombinationWeights& weights,
                                          const PesqTables& tables) {
  validate(weights);
  switch (kind) {
    case LossKind::Sdr: return std::make_unique<SdrObjective>(std::move(clean));
    case LossKind::Pesq:
      return std::make_unique<PesqObjective>(std::move(clean), tables);
    case LossKind::Stoi: return std::make_unique<StoiObjective>(std::move(clean));
    default: break;
  }
  std::vector<WeightedSum::Term> terms;
  terms.push_back({1.0, std::make_shared<SdrObjective>(clean)});
  if (kind == LossKind::SdrPesq || kind == LossKind::SdrPesqStoi)
    terms.push_back({weights.alpha, std::make_shared<PesqObjective>(clean, tables)});
  if (kind == LossKind::SdrStoi)
    terms.push_back({weights.beta, std::make_shared<StoiObjective>(clean)});
  if (kind == LossKind::SdrPesqStoi)
    terms.push_back({weights.beta, std::make_shared<StoiObjective>(clean)});
  return std::make_unique<WeightedSum>(std::string(loss_name(kind)), std::move(terms));
}

}  // namespace percloss
