#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace percloss {

// Additive stabilizer for every division and log in the loss pipelines.
inline constexpr double kEps = 1e-12;

// Running hash of the discrete decisions (clips, masks, max/min branches) a
// loss evaluation took. Two evaluations with equal digests went through the
// same smooth piece of the objective.
class BranchTrace {
 public:
  void record(bool taken) { mix(taken ? 1u : 2u); }
  void record_choice(unsigned choice) { mix(choice + 3u); }
  std::uint64_t digest() const { return hash_; }

 private:
  void mix(unsigned v) {
    hash_ ^= v;
    hash_ *= 0x100000001B3ull;
  }
  std::uint64_t hash_ = 0xCBF29CE484222325ull;
};

struct Evaluation {
  double value = 0.0;
  std::vector<double> gradient;  // empty unless requested
  std::uint64_t branches = 0;
};

// A differentiable scalar function of an estimated waveform. The reference
// signal and any weights are bound at construction; evaluate() is const and
// keeps no state between calls.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::string name() const = 0;
  virtual std::size_t input_length() const = 0;
  virtual Evaluation evaluate(std::span<const double> estimate,
                              bool want_gradient) const = 0;
};

struct Gradient {
  double value = 0.0;
  std::vector<double> d_input;
};

// Value and reverse-mode gradient with respect to the estimate. Throws
// NumericError naming the stage if anything non-finite shows up.
Gradient gradient(const Objective& objective, std::span<const double> estimate);

// |x|^2; gradient 2x.
class QuadraticObjective final : public Objective {
 public:
  explicit QuadraticObjective(std::size_t length) : length_(length) {}
  std::string name() const override { return "quadratic"; }
  std::size_t input_length() const override { return length_; }
  Evaluation evaluate(std::span<const double> estimate,
                      bool want_gradient) const override;

 private:
  std::size_t length_;
};

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Central differences at `coords` compared against gradient(). The relative
// error uses max(|analytic|, |numeric|, 1e-12) as denominator.
FiniteDiffReport finite_diff_check(const Objective& objective,
                                   std::span<const double> estimate,
                                   std::span<const std::size_t> coords,
                                   double step);

// Draws `count` distinct coordinates at which perturbing by +-10*step does not
// change any discrete decision of the objective. Throws if too few exist.
std::vector<std::size_t> generic_coordinates(const Objective& objective,
                                             std::span<const double> estimate,
                                             std::size_t count, double step,
                                             std::uint64_t seed);

void require_finite(std::span<const double> values, const char* stage);
void require_finite(double value, const char* stage);

}  // namespace percloss
