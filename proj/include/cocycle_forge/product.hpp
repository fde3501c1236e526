#pragma once

#include <complex>
#include <concepts>
#include <cstdint>

#include "cocycle_forge/base_dynamics.hpp"
#include "cocycle_forge/isometry.hpp"

namespace cocycle_forge {

/// Anything that maps base points to orthogonal maps of a fixed dimension.
template <class T>
concept TwistMap = requires(const T& t, const BasePoint& x) {
  { t(x) } -> std::convertible_to<OrthogonalMap>;
  { t.dim() } -> std::convertible_to<int>;
};

/// A twist that can also report itself as a unit complex number (l = 2 rotations).
template <class T>
concept PlanarTwistMap = TwistMap<T> && requires(const T& t, const BasePoint& x) {
  { t.planar() } -> std::convertible_to<bool>;
  { t.planar_value(x) } -> std::convertible_to<std::complex<double>>;
};

/// Anything that maps base points to fiber vectors.
template <class T>
concept Observable = requires(const T& f, const BasePoint& x) {
  { f(x) } -> std::convertible_to<FiberVector>;
};

/// Products of orthogonal maps re-orthonormalized every this many factors.
inline constexpr std::int64_t kReorthonormalizePeriod = 1024;

/// Running product of orthogonal factors. Uses a unit complex number when every
/// factor is a planar rotation and a matrix otherwise; either way the product is
/// pulled back onto U(l) every kReorthonormalizePeriod factors.
class OrthogonalProduct {
 public:
  OrthogonalProduct(int dim, bool planar) : planar_(planar && dim == 2), m_(FiberMatrix::Identity(dim, dim)) {}

  bool planar() const noexcept { return planar_; }
  int dim() const noexcept { return static_cast<int>(m_.rows()); }

  void right_multiply(const FiberMatrix& f) {
    m_ = m_ * f;
    tick();
  }
  void right_multiply(std::complex<double> z) {
    z_ *= z;
    tick();
  }
  void left_multiply(const FiberMatrix& f) {
    m_ = f * m_;
    tick();
  }
  void left_multiply(std::complex<double> z) {
    z_ = z * z_;
    tick();
  }

  /// Multiplies by twist(x) on the right, picking the representation in use.
  template <TwistMap Twist>
  void right_multiply(const Twist& twist, const BasePoint& x) {
    if constexpr (PlanarTwistMap<Twist>) {
      if (planar_) {
        right_multiply(twist.planar_value(x));
        return;
      }
    }
    right_multiply(OrthogonalMap(twist(x)).matrix());
  }

  FiberVector apply(const FiberVector& v) const {
    if (planar_) return from_complex(z_ * std::complex<double>(v[0], v[1]));
    return m_ * v;
  }

  std::complex<double> apply(std::complex<double> v) const { return z_ * v; }
  std::complex<double> complex_value() const noexcept { return z_; }

  OrthogonalMap value() const {
    if (planar_) return OrthogonalMap::from_complex(z_);
    return {OrthogonalMap::unchecked, m_};
  }

 private:
  void tick() {
    if (++count_ % kReorthonormalizePeriod != 0) return;
    if (planar_) {
      z_ /= std::abs(z_);
    } else {
      detail::gram_schmidt(m_);
    }
  }

  bool planar_;
  std::complex<double> z_{1.0, 0.0};
  FiberMatrix m_;
  std::int64_t count_ = 0;
};

}  // namespace cocycle_forge
