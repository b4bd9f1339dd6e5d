#pragma once

#include <cmath>
#include <cstddef>

namespace uwqc {

/// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) noexcept {
    add(v);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Running mean / sample standard deviation over compensated sums.
class SampleStats {
 public:
  void add(double v) noexcept {
    ++n_;
    sum_ += v;
    sum_sq_ += v * v;
  }
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return n_ ? sum_.value() / static_cast<double>(n_) : 0.0; }
  double stddev() const noexcept {
    if (n_ < 2) return 0.0;
    const double m = mean();
    const double var = (sum_sq_.value() - static_cast<double>(n_) * m * m) / static_cast<double>(n_ - 1);
    return var > 0.0 ? std::sqrt(var) : 0.0;
  }
  double stderr_of_mean() const noexcept {
    return n_ ? stddev() / std::sqrt(static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  CompensatedSum sum_;
  CompensatedSum sum_sq_;
};

}  // namespace uwqc
