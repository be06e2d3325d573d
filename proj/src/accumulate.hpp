#pragma once

#include <cmath>

namespace percloss::detail {

// Neumaier-compensated running sum. Long reductions use it so that a
// one-sample perturbation is not buried in rounding noise of the total.
class Accumulator {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  Accumulator& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace percloss::detail
