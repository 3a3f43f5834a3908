#pragma once

#include <cmath>
#include <cstdint>

namespace tripstab {

/// Neumaier's variant of Kahan summation. Order-dependent but exact to a
/// couple of ulps regardless of the magnitude spread of the terms.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Running mean / variance. The mean is accumulated as a compensated sum of
/// deviations from the first value, so constant input yields that value
/// bit-exactly; the variance uses Welford's update.
class RunningStats {
 public:
  void add(double x) noexcept {
    if (n_ == 0) shift_ = x;
    ++n_;
    dev_.add(x - shift_);
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  std::uint64_t count() const noexcept { return n_; }
  double mean() const noexcept {
    return n_ == 0 ? 0.0 : shift_ + dev_.value() / static_cast<double>(n_);
  }
  double variance() const noexcept {
    return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1);
  }
  double stddev() const noexcept { return std::sqrt(variance()); }
  double std_error() const noexcept {
    return n_ < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
  }

 private:
  std::uint64_t n_ = 0;
  double shift_ = 0.0;
  CompensatedSum dev_;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Mean only, same shifted compensated accumulation as RunningStats.
class ShiftedMean {
 public:
  void add(double x) noexcept {
    if (n_ == 0) shift_ = x;
    ++n_;
    dev_.add(x - shift_);
  }
  std::uint64_t count() const noexcept { return n_; }
  double mean() const noexcept {
    return n_ == 0 ? 0.0 : shift_ + dev_.value() / static_cast<double>(n_);
  }

 private:
  std::uint64_t n_ = 0;
  double shift_ = 0.0;
  CompensatedSum dev_;
};

/// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
  return mix_seed(mix_seed(mix_seed(base) ^ stream) ^ index);
}

}  // namespace tripstab
