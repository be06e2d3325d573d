#include "percloss/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "percloss/errors.hpp"

namespace percloss {

void require_finite(std::span<const double> values, const char* stage) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw NumericError(stage, "non-finite value at index " + std::to_string(i));
}

void require_finite(double value, const char* stage) {
  if (!std::isfinite(value)) throw NumericError(stage, "non-finite value");
}

Gradient gradient(const Objective& objective, std::span<const double> estimate) {
  if (estimate.size() != objective.input_length())
    throw InvalidArgument(objective.name() + ": estimate length " +
                          std::to_string(estimate.size()) + " != " +
                          std::to_string(objective.input_length()));
  Evaluation eval = objective.evaluate(estimate, true);
  require_finite(eval.value, (objective.name() + "/value").c_str());
  require_finite(eval.gradient, (objective.name() + "/gradient").c_str());
  return {eval.value, std::move(eval.gradient)};
}

Evaluation QuadraticObjective::evaluate(std::span<const double> estimate,
                                        bool want_gradient) const {
  Evaluation eval;
  for (double x : estimate) eval.value += x * x;
  if (want_gradient) {
    eval.gradient.resize(estimate.size());
    std::transform(estimate.begin(), estimate.end(), eval.gradient.begin(),
                   [](double x) { return 2.0 * x; });
  }
  return eval;
}

FiniteDiffReport finite_diff_check(const Objective& objective,
                                   std::span<const double> estimate,
                                   std::span<const std::size_t> coords,
                                   double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite-difference step must be > 0");
  const Gradient analytic = gradient(objective, estimate);
  std::vector<double> probe(estimate.begin(), estimate.end());

  FiniteDiffReport report;
  report.coordinates = coords.size();
  bool first = true;
  for (std::size_t idx : coords) {
    if (idx >= probe.size())
      throw InvalidArgument("finite-difference coordinate out of range");
    const double saved = probe[idx];
    probe[idx] = saved + step;
    const double up = objective.evaluate(probe, false).value;
    probe[idx] = saved - step;
    const double down = objective.evaluate(probe, false).value;
    probe[idx] = saved;

    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.d_input[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
    const double err = std::abs(a - numeric) / denom;
    if (first || err > report.max_rel_error) {
      first = false;
      report.max_rel_error = err;
      report.worst_index = idx;
      report.analytic = a;
      report.numeric = numeric;
    }
  }
  return report;
}

std::vector<std::size_t> generic_coordinates(const Objective& objective,
                                             std::span<const double> estimate,
                                             std::size_t count, double step,
                                             std::uint64_t seed) {
  const std::size_t n = estimate.size();
  if (count > n) throw InvalidArgument("more coordinates requested than samples");
  const std::uint64_t base = objective.evaluate(estimate, false).branches;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<double> probe(estimate.begin(), estimate.end());
  std::vector<std::size_t> picked;
  for (std::size_t idx : order) {
    if (picked.size() == count) break;
    const double saved = probe[idx];
    bool generic = true;
    for (double delta : {10.0 * step, -10.0 * step}) {
      probe[idx] = saved + delta;
      if (objective.evaluate(probe, false).branches != base) {
        generic = false;
        break;
      }
    }
    probe[idx] = saved;
    if (generic) picked.push_back(idx);
  }
  if (picked.size() < count)
    throw InvalidArgument(objective.name() + ": only " +
                          std::to_string(picked.size()) +
                          " generic coordinates available");
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace percloss
