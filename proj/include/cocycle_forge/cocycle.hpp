#pragma once

// The cocycle I(n, x) generated by I(x)v = Psi(x)v + rho(x), the skew product
// F(x, v) = (Tx, I(x)v), its hyperbolized version F_lambda and the inverse G_lambda.

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "cocycle_forge/base_dynamics.hpp"
#include "cocycle_forge/fields.hpp"
#include "cocycle_forge/isometry.hpp"
#include "cocycle_forge/product.hpp"

namespace cocycle_forge {

/// A cocycle by isometries of R^l over a base system, given by registry maps.
class CocycleSpec {
 public:
  CocycleSpec(BaseSystem base, OrthogonalField psi, VectorField rho)
      : base_(std::move(base)), psi_(std::move(psi)), rho_(std::move(rho)) {
    if (psi_.dim() != rho_.dim()) throw DimensionMismatch("cocycle rho", psi_.dim(), rho_.dim());
    psi_.check_compatible(base_);
    rho_.check_compatible(base_);
    rho_sup_ = rho_.sup_bound();
  }

  const BaseSystem& base() const noexcept { return base_; }
  const OrthogonalField& psi() const noexcept { return psi_; }
  const VectorField& rho() const noexcept { return rho_; }
  int dim() const { return psi_.dim(); }

  /// Upper bound on sup_X |rho| (cached at construction).
  double rho_sup() const noexcept { return rho_sup_; }

  /// I(x) = I(1, x).
  EuclideanIsometry generator(const BasePoint& x) const { return {psi_(x), rho_(x)}; }

  BasePoint step(const BasePoint& x, std::int64_t n = 1) const { return cocycle_forge::step(base_, x, n); }

 private:
  BaseSystem base_;
  OrthogonalField psi_;
  VectorField rho_;
  double rho_sup_ = 0.0;
};

inline void check_lambda_open(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw InvalidInput("lambda must lie in (0, 1), got " + std::to_string(lambda));
  }
}

struct SkewState {
  BasePoint x;
  FiberVector v;
};

/// I(n, x) for any signed n, via I(n, x) = I(n - 1, Tx) I(x) and
/// I(-n, x) = I(n, T^{-n} x)^{-1}.
inline EuclideanIsometry cocycle_n(const CocycleSpec& spec, const BasePoint& x, std::int64_t n) {
  if (n < 0) return inverse(cocycle_n(spec, spec.step(x, n), -n));
  const int l = spec.dim();
  OrthogonalProduct lin(l, false);
  FiberVector t = FiberVector::Zero(l);
  for (std::int64_t j = 0; j < n; ++j) {
    const BasePoint y = spec.step(x, j);
    const FiberMatrix psi = spec.psi()(y).matrix();
    t = psi * t + spec.rho()(y);
    lin.left_multiply(psi);
  }
  return {lin.value(), t};
}

/// I(n, x) v for n >= 0, iterating the fiber map instead of composing isometries.
inline FiberVector apply_cocycle(const CocycleSpec& spec, const BasePoint& x, std::int64_t n, const FiberVector& v) {
  if (n < 0) throw InvalidInput("apply_cocycle needs n >= 0");
  if (v.size() != spec.dim()) throw DimensionMismatch("apply_cocycle", spec.dim(), static_cast<int>(v.size()));
  if (spec.psi().planar()) {
    std::complex<double> z = to_complex(v);
    for (std::int64_t j = 0; j < n; ++j) {
      const BasePoint y = spec.step(x, j);
      z = spec.psi().planar_value(y) * z + to_complex(spec.rho()(y));
    }
    return from_complex(z);
  }
  FiberVector w = v;
  for (std::int64_t j = 0; j < n; ++j) {
    const BasePoint y = spec.step(x, j);
    w = spec.psi()(y) * w + spec.rho()(y);
  }
  return w;
}

/// One step of F: (x, v) -> (Tx, Psi(x) v + rho(x)).
inline SkewState skew_step(const CocycleSpec& spec, const SkewState& s) {
  return {spec.step(s.x, 1), apply(spec.generator(s.x), s.v)};
}

enum class Direction { forward, backward };

/// F_lambda(x, v) = (Tx, (Psi(x) v + rho(x)) / lambda) or its inverse
/// G_lambda(x, v) = (y, Psi(y)^{-1} (lambda v - rho(y))), y = T^{-1} x.
inline SkewState hyperbolized_step(const CocycleSpec& spec, double lambda, const SkewState& s, Direction dir) {
  check_lambda_open(lambda);
  if (s.v.size() != spec.dim()) throw DimensionMismatch("hyperbolized_step", spec.dim(), static_cast<int>(s.v.size()));
  if (dir == Direction::forward) {
    return {spec.step(s.x, 1), (spec.psi()(s.x) * s.v + spec.rho()(s.x)) / lambda};
  }
  const BasePoint y = spec.step(s.x, -1);
  return {y, spec.psi()(y).inverse() * (lambda * s.v - spec.rho()(y))};
}

/// Convergence of G_lambda orbits onto the graph of u_lambda.
///
/// distance[n] = |u(T^{-n} x) - fiber(G_lambda^n(x, v0))| computed directly from the
/// orbit. deviation[n] propagates e_0 = v0 - u(x) through the linear part of G_lambda,
/// e_{n+1} = lambda Psi(T^{-n-1} x)^{-1} e_n, which is what the conjugation by
/// (x, v) -> (x, v - u(x)) reduces G_lambda to. The two agree up to the accuracy of u.
struct AttractorTrace {
  std::vector<double> distance;
  std::vector<double> deviation;

  /// deviation[n + 1] / deviation[n].
  std::vector<double> step_ratios() const {
    std::vector<double> r;
    for (std::size_t n = 0; n + 1 < deviation.size(); ++n) r.push_back(deviation[n + 1] / deviation[n]);
    return r;
  }
};

template <Observable Attractor>
AttractorTrace attractor_trace(const CocycleSpec& spec, double lambda, const BasePoint& x, const FiberVector& v0,
                               std::int64_t n_max, const Attractor& u) {
  check_lambda_open(lambda);
  if (n_max < 0) throw InvalidInput("attractor_trace needs n_max >= 0");
  AttractorTrace out;
  out.distance.reserve(static_cast<std::size_t>(n_max + 1));
  out.deviation.reserve(static_cast<std::size_t>(n_max + 1));
  SkewState s{x, v0};
  FiberVector e = v0 - FiberVector(u(x));
  out.distance.push_back(e.norm());
  out.deviation.push_back(e.norm());
  for (std::int64_t n = 1; n <= n_max; ++n) {
    s = hyperbolized_step(spec, lambda, s, Direction::backward);
    e = lambda * (spec.psi()(s.x).inverse() * e);
    out.distance.push_back((FiberVector(u(s.x)) - s.v).norm());
    out.deviation.push_back(e.norm());
  }
  return out;
}

/// sup over 0 <= k <= n of |fiber(F^k(x, v))|.
inline double fiber_orbit_sup(const CocycleSpec& spec, const SkewState& start, std::int64_t n) {
  double sup = start.v.norm();
  SkewState s = start;
  for (std::int64_t k = 0; k < n; ++k) {
    s = skew_step(spec, s);
    sup = std::max(sup, s.v.norm());
  }
  return sup;
}

}  // namespace cocycle_forge
