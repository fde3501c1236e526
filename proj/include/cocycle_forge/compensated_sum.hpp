#pragma once

#include <cmath>
#include <complex>

namespace cocycle_forge {

namespace detail {

// Neumaier's improvement of Kahan summation: also correct when the addend is
// larger in magnitude than the running sum.
inline void neumaier_add(double& sum, double& comp, double x) noexcept {
  const double t = sum + x;
  if (std::abs(sum) >= std::abs(x)) {
    comp += (sum - t) + x;
  } else {
    comp += (x - t) + sum;
  }
  sum = t;
}

}  // namespace detail

/// Compensated accumulator for scalars.
class CompensatedSum {
 public:
  CompensatedSum& operator+=(double x) noexcept {
    detail::neumaier_add(sum_, comp_, x);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Compensated accumulator for complex numbers (real and imaginary parts independently).
class CompensatedComplexSum {
 public:
  CompensatedComplexSum& operator+=(std::complex<double> z) noexcept {
    re_ += z.real();
    im_ += z.imag();
    return *this;
  }
  std::complex<double> value() const noexcept { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum re_;
  CompensatedSum im_;
};

/// Component-wise compensated accumulator for Eigen column vectors.
template <class Vec>
class CompensatedVectorSum {
 public:
  explicit CompensatedVectorSum(int dim) : sum_(Vec::Zero(dim)), comp_(Vec::Zero(dim)) {}

  template <class Other>
  CompensatedVectorSum& add(const Other& x) noexcept {
    for (int i = 0; i < sum_.size(); ++i) detail::neumaier_add(sum_[i], comp_[i], x[i]);
    return *this;
  }

  template <class Other>
  CompensatedVectorSum& add_scaled(double weight, const Other& x) noexcept {
    for (int i = 0; i < sum_.size(); ++i) detail::neumaier_add(sum_[i], comp_[i], weight * x[i]);
    return *this;
  }

  Vec value() const { return sum_ + comp_; }
  int dim() const noexcept { return static_cast<int>(sum_.size()); }

 private:
  Vec sum_;
  Vec comp_;
};

}  // namespace cocycle_forge
