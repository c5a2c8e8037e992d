#pragma once

#include <cmath>
#include <algorithm>
#include <cstddef>

namespace mmimo::stats {

// Sample mean and standard error, accumulated around the first sample so
// that constant inputs give exactly zero spread.
class RunningMean {
 public:
  void add(double x) {
    if (count_ == 0) shift_ = x;
    const double d = x - shift_;
    sum_ += d;
    sum_sq_ += d * d;
    ++count_;
  }

  std::size_t count() const { return count_; }
  double mean() const { return count_ ? shift_ + sum_ / count_ : 0.0; }

  double variance() const {
    if (count_ < 2) return 0.0;
    const double n = static_cast<double>(count_);
    return std::max(0.0, (sum_sq_ - sum_ * sum_ / n) / (n - 1.0));
  }

  double std_error() const { return count_ < 2 ? 0.0 : std::sqrt(variance() / count_); }

 private:
  std::size_t count_ = 0;
  double shift_ = 0.0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
};

}  // namespace mmimo::stats
