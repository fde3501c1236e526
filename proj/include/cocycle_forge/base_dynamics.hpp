#pragma once

// Invertible base dynamics T on a compact space X: circle and torus rotations
// (coordinates in turns) and finite cyclic permutations.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cocycle_forge/errors.hpp"

namespace cocycle_forge {

inline constexpr int kMaxTorusDim = 4;

/// (sqrt(5) - 1) / 2, in turns.
inline constexpr double kGoldenTurns = 0.61803398874989484820458683436564;

enum class BaseKind { circle, torus, finite_cyclic };

inline const char* to_string(BaseKind k) {
  switch (k) {
    case BaseKind::circle: return "circle";
    case BaseKind::torus: return "torus";
    case BaseKind::finite_cyclic: return "cyclic";
  }
  return "?";
}

namespace detail {

// Reduces t into [0, 1).
inline double wrap_turns(double t) noexcept {
  double r = t - std::floor(t);
  if (r >= 1.0) r = 0.0;
  return r;
}

// theta + n * alpha (mod 1) with a single rounding of the product: the exact
// error term of n * alpha is recovered with an fma, so T^n x does not
// accumulate rounding along an orbit.
inline double rotate_turns(double theta, double alpha, std::int64_t n) noexcept {
  const auto nd = static_cast<double>(n);
  const double p = nd * alpha;
  const double e = std::fma(nd, alpha, -p);
  const double frac = p - std::floor(p);
  return wrap_turns((theta + frac) + e);
}

}  // namespace detail

/// A point of X. Circle and torus coordinates are always reduced mod 1.
class BasePoint {
 public:
  static BasePoint circle(double turns) {
    BasePoint p;
    p.kind_ = BaseKind::circle;
    p.dim_ = 1;
    p.coords_[0] = detail::wrap_turns(turns);
    return p;
  }

  static BasePoint torus(std::span<const double> turns) {
    if (turns.empty() || turns.size() > static_cast<std::size_t>(kMaxTorusDim)) {
      throw InvalidInput("torus dimension must be in [1, " + std::to_string(kMaxTorusDim) + "]");
    }
    BasePoint p;
    p.kind_ = BaseKind::torus;
    p.dim_ = static_cast<int>(turns.size());
    for (int i = 0; i < p.dim_; ++i) p.coords_[i] = detail::wrap_turns(turns[i]);
    return p;
  }

  static BasePoint cyclic(std::int64_t index, std::int64_t period) {
    if (period < 1) throw InvalidInput("cyclic period must be >= 1");
    BasePoint p;
    p.kind_ = BaseKind::finite_cyclic;
    p.dim_ = 0;
    p.period_ = period;
    p.index_ = ((index % period) + period) % period;
    return p;
  }

  BaseKind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }
  double angle() const noexcept { return coords_[0]; }
  std::span<const double> coords() const noexcept { return {coords_.data(), static_cast<std::size_t>(dim_)}; }
  std::int64_t index() const noexcept { return index_; }
  std::int64_t period() const noexcept { return period_; }

  /// Position in turns along `axis`: the coordinate itself for rotations and
  /// index / period for cyclic bases. Closed-form fields are written in terms of it.
  double phase(int axis = 0) const noexcept {
    if (kind_ == BaseKind::finite_cyclic) return static_cast<double>(index_) / static_cast<double>(period_);
    return coords_[axis < dim_ ? axis : 0];
  }

  friend bool operator==(const BasePoint& a, const BasePoint& b) noexcept {
    if (a.kind_ != b.kind_) return false;
    if (a.kind_ == BaseKind::finite_cyclic) return a.index_ == b.index_ && a.period_ == b.period_;
    if (a.dim_ != b.dim_) return false;
    for (int i = 0; i < a.dim_; ++i) {
      if (a.coords_[i] != b.coords_[i]) return false;
    }
    return true;
  }

 private:
  BasePoint() = default;

  BaseKind kind_ = BaseKind::circle;
  int dim_ = 1;
  std::array<double, kMaxTorusDim> coords_{};
  std::int64_t index_ = 0;
  std::int64_t period_ = 1;
};

/// Distance on X: the max over coordinates of the circular distance (turns), or
/// 0/1 for cyclic points.
inline double base_distance(const BasePoint& a, const BasePoint& b) {
  if (a.kind() != b.kind() || a.dim() != b.dim()) throw InvalidInput("base points of different spaces");
  if (a.kind() == BaseKind::finite_cyclic) return a.index() == b.index() ? 0.0 : 1.0;
  double d = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    double t = std::abs(a.coords()[i] - b.coords()[i]);
    t = std::min(t, 1.0 - t);
    d = std::max(d, t);
  }
  return d;
}

struct CircleRotation {
  double alpha;
};

struct TorusRotation {
  std::vector<double> alpha;
};

struct FiniteCyclic {
  std::int64_t period;
};

/// The homeomorphism T. `uniquely_ergodic_extension` records, as a configuration
/// assumption, whether the twisted extension is taken to be uniquely ergodic; it is
/// never certified.
class BaseSystem {
 public:
  using Variant = std::variant<CircleRotation, TorusRotation, FiniteCyclic>;

  static BaseSystem circle(double alpha, bool uniquely_ergodic_extension = false) {
    return BaseSystem(CircleRotation{alpha}, uniquely_ergodic_extension);
  }
  static BaseSystem torus(std::vector<double> alpha, bool uniquely_ergodic_extension = false) {
    if (alpha.empty() || alpha.size() > static_cast<std::size_t>(kMaxTorusDim)) {
      throw InvalidInput("torus dimension must be in [1, " + std::to_string(kMaxTorusDim) + "]");
    }
    return BaseSystem(TorusRotation{std::move(alpha)}, uniquely_ergodic_extension);
  }
  static BaseSystem cyclic(std::int64_t period) {
    if (period < 1) throw InvalidInput("cyclic period must be >= 1");
    return BaseSystem(FiniteCyclic{period}, false);
  }

  BaseKind kind() const noexcept { return static_cast<BaseKind>(v_.index()); }
  const Variant& variant() const noexcept { return v_; }
  bool uniquely_ergodic_extension() const noexcept { return ue_extension_; }

  double alpha() const {
    if (const auto* c = std::get_if<CircleRotation>(&v_)) return c->alpha;
    throw InvalidInput("alpha() requires a circle rotation");
  }
  const std::vector<double>& alphas() const { return std::get<TorusRotation>(v_).alpha; }
  std::int64_t period() const {
    if (const auto* c = std::get_if<FiniteCyclic>(&v_)) return c->period;
    throw InvalidInput("period() requires a finite cyclic base");
  }
  int torus_dim() const { return static_cast<int>(std::get<TorusRotation>(v_).alpha.size()); }

  bool contains(const BasePoint& x) const noexcept {
    switch (kind()) {
      case BaseKind::circle: return x.kind() == BaseKind::circle;
      case BaseKind::torus: return x.kind() == BaseKind::torus && x.dim() == torus_dim();
      case BaseKind::finite_cyclic:
        return x.kind() == BaseKind::finite_cyclic && x.period() == std::get<FiniteCyclic>(v_).period;
    }
    return false;
  }

  std::string describe() const {
    switch (kind()) {
      case BaseKind::circle: return "circle(alpha=" + std::to_string(alpha()) + ")";
      case BaseKind::torus: return "torus(d=" + std::to_string(torus_dim()) + ")";
      case BaseKind::finite_cyclic: return "cyclic(p=" + std::to_string(period()) + ")";
    }
    return "?";
  }

 private:
  BaseSystem(Variant v, bool ue) : v_(std::move(v)), ue_extension_(ue) {}

  Variant v_;
  bool ue_extension_ = false;
};

/// T^n x for any signed n.
inline BasePoint step(const BaseSystem& sys, const BasePoint& x, std::int64_t n) {
  if (!sys.contains(x)) throw InvalidInput("base point does not belong to " + sys.describe());
  switch (sys.kind()) {
    case BaseKind::circle:
      return BasePoint::circle(detail::rotate_turns(x.angle(), sys.alpha(), n));
    case BaseKind::torus: {
      std::array<double, kMaxTorusDim> c{};
      const auto& a = sys.alphas();
      for (int i = 0; i < x.dim(); ++i) c[i] = detail::rotate_turns(x.coords()[i], a[i], n);
      return BasePoint::torus(std::span<const double>(c.data(), static_cast<std::size_t>(x.dim())));
    }
    case BaseKind::finite_cyclic: {
      const std::int64_t p = sys.period();
      return BasePoint::cyclic(x.index() + (n % p), p);
    }
  }
  return x;
}

/// Ordered sample of X used in place of sup over X and integrals against the
/// invariant measure.
struct SampleGrid {
  std::vector<BasePoint> points;
  std::string descriptor;

  std::size_t size() const noexcept { return points.size(); }
  const BasePoint& operator[](std::size_t i) const { return points[i]; }
};

/// M equispaced points shifted by `offset` (turns). Cyclic bases return all states.
/// Torus grids are rank-1 lattices i/M * (1, g_1, ..., g_{d-1}) mod 1 with
/// golden-ratio generators; the first coordinate keeps the points distinct.
inline SampleGrid make_grid(const BaseSystem& sys, std::size_t M, double offset = 0.0) {
  SampleGrid g;
  if (sys.kind() == BaseKind::finite_cyclic) {
    const auto p = sys.period();
    g.points.reserve(static_cast<std::size_t>(p));
    for (std::int64_t i = 0; i < p; ++i) g.points.push_back(BasePoint::cyclic(i, p));
    g.descriptor = "cyclic-all(" + std::to_string(p) + ")";
    return g;
  }
  if (M < 1) throw InvalidInput("grid size must be >= 1");
  g.points.reserve(M);
  const double m = static_cast<double>(M);
  if (sys.kind() == BaseKind::circle) {
    for (std::size_t i = 0; i < M; ++i) g.points.push_back(BasePoint::circle(static_cast<double>(i) / m + offset));
  } else {
    const int d = sys.torus_dim();
    std::array<std::int64_t, kMaxTorusDim> gen{1, 0, 0, 0};
    for (int k = 1; k < d; ++k) {
      gen[k] = static_cast<std::int64_t>(std::llround(m * detail::wrap_turns(k * kGoldenTurns)));
    }
    std::array<double, kMaxTorusDim> c{};
    for (std::size_t i = 0; i < M; ++i) {
      for (int k = 0; k < d; ++k) {
        const auto num = (static_cast<std::int64_t>(i) * gen[k]) % static_cast<std::int64_t>(M);
        c[k] = static_cast<double>(num) / m + offset;
      }
      g.points.push_back(BasePoint::torus(std::span<const double>(c.data(), static_cast<std::size_t>(d))));
    }
  }
  g.descriptor = "uniform(" + std::to_string(M) + ", offset=" + std::to_string(offset) + ")";
  return g;
}

/// Approximates sup over X: the uniform M-point grid followed by the same grid shifted
/// by a golden fraction of the spacing (2M points; cyclic bases return all states).
inline SampleGrid make_sup_grid(const BaseSystem& sys, std::size_t M) {
  SampleGrid g = make_grid(sys, M, 0.0);
  if (sys.kind() == BaseKind::finite_cyclic) return g;
  SampleGrid shifted = make_grid(sys, M, kGoldenTurns / static_cast<double>(M));
  g.points.insert(g.points.end(), shifted.points.begin(), shifted.points.end());
  g.descriptor = "sup(" + std::to_string(M) + "+golden)";
  return g;
}

}  // namespace cocycle_forge
