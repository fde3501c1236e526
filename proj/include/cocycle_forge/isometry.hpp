#pragma once

// Isometries of R^l written as v -> Psi v + rho with Psi orthogonal.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string>

#include "cocycle_forge/errors.hpp"

namespace cocycle_forge {

/// Largest supported fiber dimension l. Vectors and matrices live on the stack.
inline constexpr int kMaxFiberDim = 8;

using FiberVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxFiberDim, 1>;
using FiberMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxFiberDim, kMaxFiberDim>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline void check_fiber_dim(int dim) {
  if (dim < 1 || dim > kMaxFiberDim) {
    throw InvalidInput("fiber dimension must be in [1, " + std::to_string(kMaxFiberDim) +
                       "], got " + std::to_string(dim));
  }
}

/// R^2 ~ C identification: (x, y) <-> x + iy.
inline std::complex<double> to_complex(const FiberVector& v) {
  if (v.size() != 2) throw DimensionMismatch("complex view", 2, static_cast<int>(v.size()));
  return {v[0], v[1]};
}

inline FiberVector from_complex(std::complex<double> z) {
  FiberVector v(2);
  v << z.real(), z.imag();
  return v;
}

inline FiberVector zero_vector(int dim) {
  check_fiber_dim(dim);
  return FiberVector::Zero(dim);
}

namespace detail {

// Two passes of modified Gram-Schmidt on the columns. Returns false if a column
// collapses (input numerically singular).
inline bool gram_schmidt(FiberMatrix& m) {
  const auto n = m.cols();
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < j; ++i) {
        const double proj = m.col(i).dot(m.col(j));
        m.col(j) -= proj * m.col(i);
      }
      const double nrm = m.col(j).norm();
      if (!(nrm > 1e-300)) return false;
      m.col(j) /= nrm;
    }
  }
  return true;
}

inline double orthogonality_defect(const FiberMatrix& m) {
  const FiberMatrix gram = m.transpose() * m;
  return (gram - FiberMatrix::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// An element of the orthogonal group U(l).
///
/// The checked constructor accepts matrices within 1e-6 of orthogonal and
/// re-orthonormalizes them with Gram-Schmidt, so the stored matrix satisfies
/// |Psi^T Psi - Id|_max <= 1e-12 and det = +-1.
class OrthogonalMap {
 public:
  struct unchecked_t {};
  static constexpr unchecked_t unchecked{};

  explicit OrthogonalMap(const FiberMatrix& m) : m_(m) {
    if (m.rows() != m.cols()) throw InvalidInput("orthogonal map must be square");
    check_fiber_dim(static_cast<int>(m.rows()));
    if (!m.allFinite()) throw InvalidInput("orthogonal map has non-finite entries");
    if (detail::orthogonality_defect(m) > 1e-6) {
      throw InvalidInput("matrix is not orthogonal (|M^T M - I|_max > 1e-6)");
    }
    if (!detail::gram_schmidt(m_)) throw InvalidInput("matrix is singular");
  }

  /// Wraps a matrix already known to be orthogonal to working precision (products,
  /// transposes, closed-form rotations). No re-orthonormalization.
  OrthogonalMap(unchecked_t, const FiberMatrix& m) : m_(m) {}

  static OrthogonalMap identity(int dim) {
    check_fiber_dim(dim);
    return {unchecked, FiberMatrix::Identity(dim, dim)};
  }

  /// Planar rotation by `angle` radians (l = 2).
  static OrthogonalMap rotation(double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    FiberMatrix m(2, 2);
    m << c, -s, s, c;
    return {unchecked, m};
  }

  static OrthogonalMap from_complex(std::complex<double> z) {
    const double r = std::abs(z);
    if (!(std::abs(r - 1.0) <= 1e-6)) throw InvalidInput("complex rotation must have modulus 1");
    z /= r;
    FiberMatrix m(2, 2);
    m << z.real(), -z.imag(), z.imag(), z.real();
    return {unchecked, m};
  }

  /// Block diagonal of planar rotations; a trailing 1x1 block (+1) when dim is odd
  /// or when fewer blocks than dim/2 are given.
  static OrthogonalMap planar_blocks(std::span<const double> angles, int dim) {
    check_fiber_dim(dim);
    if (static_cast<int>(angles.size()) * 2 > dim) {
      throw InvalidInput("too many rotation blocks for dimension " + std::to_string(dim));
    }
    FiberMatrix m = FiberMatrix::Identity(dim, dim);
    for (std::size_t b = 0; b < angles.size(); ++b) {
      const auto i = static_cast<Eigen::Index>(2 * b);
      const double c = std::cos(angles[b]);
      const double s = std::sin(angles[b]);
      m(i, i) = c;
      m(i, i + 1) = -s;
      m(i + 1, i) = s;
      m(i + 1, i + 1) = c;
    }
    return {unchecked, m};
  }

  int dim() const noexcept { return static_cast<int>(m_.rows()); }
  const FiberMatrix& matrix() const noexcept { return m_; }
  double determinant() const { return m_.determinant(); }
  double orthogonality_defect() const { return detail::orthogonality_defect(m_); }

  OrthogonalMap inverse() const { return {unchecked, m_.transpose()}; }

  OrthogonalMap reorthonormalized() const {
    FiberMatrix m = m_;
    detail::gram_schmidt(m);
    return {unchecked, m};
  }

  OrthogonalMap operator*(const OrthogonalMap& other) const {
    if (other.dim() != dim()) throw DimensionMismatch("orthogonal product", dim(), other.dim());
    return {unchecked, m_ * other.m_};
  }

  FiberVector operator*(const FiberVector& v) const {
    if (v.size() != m_.cols()) throw DimensionMismatch("orthogonal action", dim(), static_cast<int>(v.size()));
    return m_ * v;
  }

  /// For l = 2 rotations (det = +1) the unit complex number with the same action.
  std::optional<std::complex<double>> as_complex() const {
    if (dim() != 2 || m_(0, 0) * m_(1, 1) - m_(0, 1) * m_(1, 0) < 0.0) return std::nullopt;
    return std::complex<double>(m_(0, 0), m_(1, 0));
  }

 private:
  FiberMatrix m_;
};

/// v -> psi v + rho.
class EuclideanIsometry {
 public:
  EuclideanIsometry(OrthogonalMap psi, FiberVector rho) : psi_(std::move(psi)), rho_(std::move(rho)) {
    if (rho_.size() != psi_.dim()) {
      throw DimensionMismatch("isometry translation", psi_.dim(), static_cast<int>(rho_.size()));
    }
  }

  static EuclideanIsometry identity(int dim) { return {OrthogonalMap::identity(dim), zero_vector(dim)}; }
  static EuclideanIsometry translation(const FiberVector& c) {
    return {OrthogonalMap::identity(static_cast<int>(c.size())), c};
  }

  int dim() const noexcept { return psi_.dim(); }
  const OrthogonalMap& linear_part() const noexcept { return psi_; }
  const FiberVector& translation_part() const noexcept { return rho_; }

  FiberVector operator()(const FiberVector& v) const { return psi_ * v + rho_; }

 private:
  OrthogonalMap psi_;
  FiberVector rho_;
};

/// (a o b)(v) = a(b(v)).
inline EuclideanIsometry compose(const EuclideanIsometry& a, const EuclideanIsometry& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("compose", a.dim(), b.dim());
  return {a.linear_part() * b.linear_part(), a.linear_part() * b.translation_part() + a.translation_part()};
}

inline EuclideanIsometry inverse(const EuclideanIsometry& g) {
  OrthogonalMap inv = g.linear_part().inverse();
  FiberVector t = -(inv * g.translation_part());
  return {std::move(inv), std::move(t)};
}

inline FiberVector apply(const EuclideanIsometry& g, const FiberVector& v) {
  if (v.size() != g.dim()) throw DimensionMismatch("apply", g.dim(), static_cast<int>(v.size()));
  return g(v);
}

/// max(|Psi_a - Psi_b|_max, |rho_a - rho_b|_inf).
inline double distance(const EuclideanIsometry& a, const EuclideanIsometry& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("isometry distance", a.dim(), b.dim());
  const double dm = (a.linear_part().matrix() - b.linear_part().matrix()).cwiseAbs().maxCoeff();
  const double dv = (a.translation_part() - b.translation_part()).cwiseAbs().maxCoeff();
  return std::max(dm, dv);
}

/// Complex fast path for orientation-preserving isometries of R^2 ~ C: z -> r z + s, |r| = 1.
struct PlanarIsometry {
  std::complex<double> rotation{1.0, 0.0};
  std::complex<double> shift{0.0, 0.0};

  std::complex<double> operator()(std::complex<double> z) const noexcept { return rotation * z + shift; }

  static std::optional<PlanarIsometry> from(const EuclideanIsometry& g) {
    auto r = g.linear_part().as_complex();
    if (!r) return std::nullopt;
    return PlanarIsometry{*r, to_complex(g.translation_part())};
  }

  EuclideanIsometry to_isometry() const {
    return {OrthogonalMap::from_complex(rotation), from_complex(shift)};
  }
};

inline PlanarIsometry compose(const PlanarIsometry& a, const PlanarIsometry& b) noexcept {
  return {a.rotation * b.rotation, a.rotation * b.shift + a.shift};
}

inline PlanarIsometry inverse(const PlanarIsometry& g) noexcept {
  const auto inv = std::conj(g.rotation);
  return {inv, -(inv * g.shift)};
}

}  // namespace cocycle_forge
