#pragma once

// Closed-form registry of maps X -> U(l) and X -> R^l. Everything a cocycle or an
// oracle needs is expressed through these so it can be serialized and re-evaluated
// anywhere on X (not just on a grid).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cocycle_forge/base_dynamics.hpp"
#include "cocycle_forge/isometry.hpp"

namespace cocycle_forge {

/// beta(x) = offset + 2 pi winding t + amplitude sin(2 pi harmonic t + phase), t = x.phase(axis).
/// An integer winding keeps e^{i beta} continuous on the circle.
struct AngleFunction {
  double offset = 0.0;
  std::int64_t winding = 0;
  double amplitude = 0.0;
  std::int64_t harmonic = 1;
  double phase = 0.0;
  int axis = 0;

  double operator()(const BasePoint& x) const noexcept {
    const double t = x.phase(axis);
    double v = offset;
    if (winding != 0) v += kTwoPi * detail::wrap_turns(static_cast<double>(winding) * t);
    if (amplitude != 0.0) {
      v += amplitude * std::sin(kTwoPi * detail::wrap_turns(static_cast<double>(harmonic) * t) + phase);
    }
    return v;
  }

  bool is_constant() const noexcept { return winding == 0 && amplitude == 0.0; }
};

struct IdentityPsi {
  int dim;
};

/// e^{i beta} acting on R^2 ~ C.
struct ConstantRotationPsi {
  double beta;
};

/// Planar rotation blocks along the diagonal; remaining coordinates fixed.
struct DiagonalRotationsPsi {
  int dim;
  std::vector<AngleFunction> blocks;
};

struct ConstantPsi {
  OrthogonalMap value;
};

/// One orthogonal map per state of a finite cyclic base.
struct TablePsi {
  std::vector<OrthogonalMap> values;
};

/// A continuous map X -> U(l) drawn from the registry.
class OrthogonalField {
 public:
  using Variant = std::variant<IdentityPsi, ConstantRotationPsi, DiagonalRotationsPsi, ConstantPsi, TablePsi>;

  OrthogonalField(Variant v) : v_(std::move(v)) {  // NOLINT(google-explicit-constructor)
    validate();
    if (const auto* r = std::get_if<ConstantRotationPsi>(&v_)) {
      constant_ = OrthogonalMap::rotation(r->beta);
      constant_planar_ = std::polar(1.0, r->beta);
    } else if (const auto* c = std::get_if<ConstantPsi>(&v_)) {
      constant_ = c->value;
      if (auto z = c->value.as_complex()) constant_planar_ = *z;
    } else if (const auto* i = std::get_if<IdentityPsi>(&v_)) {
      constant_ = OrthogonalMap::identity(i->dim);
    }
  }

  static OrthogonalField identity(int dim) { return OrthogonalField(Variant(IdentityPsi{dim})); }
  static OrthogonalField constant_rotation(double beta) { return OrthogonalField(Variant(ConstantRotationPsi{beta})); }
  static OrthogonalField diagonal_rotations(int dim, std::vector<AngleFunction> blocks) {
    return OrthogonalField(Variant(DiagonalRotationsPsi{dim, std::move(blocks)}));
  }
  static OrthogonalField constant(OrthogonalMap m) { return OrthogonalField(Variant(ConstantPsi{std::move(m)})); }
  static OrthogonalField table(std::vector<OrthogonalMap> values) { return OrthogonalField(Variant(TablePsi{std::move(values)})); }

  const Variant& variant() const noexcept { return v_; }

  int dim() const {
    return std::visit(
        [](const auto& f) -> int {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, IdentityPsi>) return f.dim;
          else if constexpr (std::is_same_v<T, ConstantRotationPsi>) return 2;
          else if constexpr (std::is_same_v<T, DiagonalRotationsPsi>) return f.dim;
          else if constexpr (std::is_same_v<T, ConstantPsi>) return f.value.dim();
          else return f.values.front().dim();
        },
        v_);
  }

  std::string kind_name() const {
    static constexpr std::array<const char*, 5> names{"identity", "constant_rotation", "diagonal_rotations",
                                                      "constant_matrix", "table"};
    return names[v_.index()];
  }

  bool is_identity() const noexcept { return std::holds_alternative<IdentityPsi>(v_); }
  /// True when the value does not depend on x.
  bool is_constant() const noexcept { return constant_.has_value(); }

  /// True when every value is a rotation of R^2, so the complex fast path applies.
  bool planar() const {
    if (dim() != 2) return false;
    return std::visit(
        [](const auto& f) -> bool {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantPsi>) return f.value.as_complex().has_value();
          else if constexpr (std::is_same_v<T, TablePsi>) {
            return std::all_of(f.values.begin(), f.values.end(),
                               [](const OrthogonalMap& m) { return m.as_complex().has_value(); });
          } else return true;
        },
        v_);
  }

  /// Complex value at x; only meaningful when planar().
  std::complex<double> planar_value(const BasePoint& x) const {
    return std::visit(
        [&](const auto& f) -> std::complex<double> {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, DiagonalRotationsPsi>) {
            return f.blocks.empty() ? std::complex<double>(1.0, 0.0) : std::polar(1.0, f.blocks[0](x));
          } else if constexpr (!std::is_same_v<T, TablePsi>) {
            return constant_planar_;
          } else return *f.values[static_cast<std::size_t>(x.index())].as_complex();
        },
        v_);
  }

  OrthogonalMap operator()(const BasePoint& x) const {
    return std::visit(
        [&](const auto& f) -> OrthogonalMap {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, DiagonalRotationsPsi>) {
            std::array<double, kMaxFiberDim / 2> angles{};
            for (std::size_t b = 0; b < f.blocks.size(); ++b) angles[b] = f.blocks[b](x);
            return OrthogonalMap::planar_blocks(std::span<const double>(angles.data(), f.blocks.size()), f.dim);
          } else if constexpr (!std::is_same_v<T, TablePsi>) {
            return *constant_;
          } else {
            if (x.kind() != BaseKind::finite_cyclic) throw InvalidInput("table field needs a cyclic base point");
            return f.values[static_cast<std::size_t>(x.index())];
          }
        },
        v_);
  }

  /// Checks that the field is defined on every point of `sys`.
  void check_compatible(const BaseSystem& sys) const {
    if (const auto* t = std::get_if<TablePsi>(&v_)) {
      if (sys.kind() != BaseKind::finite_cyclic || static_cast<std::int64_t>(t->values.size()) != sys.period()) {
        throw InvalidInput("table orthogonal field needs a cyclic base with period " +
                           std::to_string(t->values.size()));
      }
    }
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, IdentityPsi>) check_fiber_dim(f.dim);
          else if constexpr (std::is_same_v<T, DiagonalRotationsPsi>) {
            check_fiber_dim(f.dim);
            if (static_cast<int>(f.blocks.size()) * 2 > f.dim) throw InvalidInput("too many rotation blocks");
          } else if constexpr (std::is_same_v<T, TablePsi>) {
            if (f.values.empty()) throw InvalidInput("empty orthogonal table");
            for (const auto& m : f.values) {
              if (m.dim() != f.values.front().dim()) throw InvalidInput("orthogonal table with mixed dimensions");
            }
          }
        },
        v_);
  }

  Variant v_;
  std::optional<OrthogonalMap> constant_;
  std::complex<double> constant_planar_{1.0, 0.0};
};

/// Inverse (transpose) of an orthogonal field, evaluated pointwise.
class InverseField {
 public:
  explicit InverseField(const OrthogonalField& f) : f_(&f) {}
  int dim() const { return f_->dim(); }
  bool planar() const { return f_->planar(); }
  std::complex<double> planar_value(const BasePoint& x) const { return std::conj(f_->planar_value(x)); }
  OrthogonalMap operator()(const BasePoint& x) const { return (*f_)(x).inverse(); }

 private:
  const OrthogonalField* f_;
};

struct FourierTerm {
  std::array<std::int64_t, kMaxTorusDim> k{};
  std::complex<double> coeff;
};

struct ConstantRho {
  FiberVector value;
};

/// Trigonometric polynomial in R^2 ~ C: sum_k c_k e^{2 pi i k.x}.
struct FourierRho {
  std::vector<FourierTerm> terms;
};

/// One vector per state of a finite cyclic base.
struct TableRho {
  std::vector<FiberVector> values;
};

/// x -> frame(x)^{-1} e. Built from an invariant section of the twisted extension this
/// gives nontrivial solutions of f(Tx) = F(x)^{-1} f(x).
struct FrameInverseRho {
  std::shared_ptr<const OrthogonalField> frame;
  FiberVector e;
};

/// A continuous map X -> R^l drawn from the registry.
class VectorField {
 public:
  using Variant = std::variant<ConstantRho, FourierRho, TableRho, FrameInverseRho>;

  VectorField(Variant v) : v_(std::move(v)) { prepare(); }  // NOLINT(google-explicit-constructor)

  static VectorField constant(FiberVector c) { return VectorField(Variant(ConstantRho{std::move(c)})); }
  static VectorField zero(int dim) { return VectorField(Variant(ConstantRho{zero_vector(dim)})); }
  static VectorField fourier(std::vector<FourierTerm> terms) { return VectorField(Variant(FourierRho{std::move(terms)})); }
  /// Circle harmonics given as (k, c_k) pairs.
  static VectorField fourier_circle(const std::vector<std::pair<std::int64_t, std::complex<double>>>& harmonics) {
    std::vector<FourierTerm> terms;
    terms.reserve(harmonics.size());
    for (const auto& [k, c] : harmonics) {
      FourierTerm t;
      t.k[0] = k;
      t.coeff = c;
      terms.push_back(t);
    }
    return VectorField(Variant(FourierRho{std::move(terms)}));
  }
  static VectorField table(std::vector<FiberVector> values) { return VectorField(Variant(TableRho{std::move(values)})); }
  static VectorField frame_inverse(OrthogonalField frame, FiberVector e) {
    return VectorField(Variant(FrameInverseRho{std::make_shared<const OrthogonalField>(std::move(frame)), std::move(e)}));
  }

  const Variant& variant() const noexcept { return v_; }

  std::string kind_name() const {
    static constexpr std::array<const char*, 4> names{"constant", "fourier", "table", "frame_inverse"};
    return names[v_.index()];
  }

  int dim() const {
    return std::visit(
        [](const auto& f) -> int {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantRho>) return static_cast<int>(f.value.size());
          else if constexpr (std::is_same_v<T, FourierRho>) return 2;
          else if constexpr (std::is_same_v<T, TableRho>) return static_cast<int>(f.values.front().size());
          else return static_cast<int>(f.e.size());
        },
        v_);
  }

  /// Rigorous upper bound on sup_X |f| (not a grid estimate): truncation lengths of
  /// every series are derived from it.
  double sup_bound() const noexcept { return sup_bound_; }

  FiberVector operator()(const BasePoint& x) const {
    return std::visit(
        [&](const auto& f) -> FiberVector {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantRho>) return f.value;
          else if constexpr (std::is_same_v<T, FourierRho>) return from_complex(eval_fourier(f, x));
          else if constexpr (std::is_same_v<T, TableRho>) {
            if (x.kind() != BaseKind::finite_cyclic) throw InvalidInput("table field needs a cyclic base point");
            return f.values[static_cast<std::size_t>(x.index())];
          } else return (*f.frame)(x).inverse() * f.e;
        },
        v_);
  }

  void check_compatible(const BaseSystem& sys) const {
    if (const auto* t = std::get_if<TableRho>(&v_)) {
      if (sys.kind() != BaseKind::finite_cyclic || static_cast<std::int64_t>(t->values.size()) != sys.period()) {
        throw InvalidInput("table vector field needs a cyclic base with period " + std::to_string(t->values.size()));
      }
    }
    if (const auto* fi = std::get_if<FrameInverseRho>(&v_)) fi->frame->check_compatible(sys);
    if (const auto* fr = std::get_if<FourierRho>(&v_)) {
      const int axes = sys.kind() == BaseKind::torus ? sys.torus_dim() : 1;
      for (const auto& t : fr->terms) {
        for (int a = axes; a < kMaxTorusDim; ++a) {
          if (t.k[a] != 0) throw InvalidInput("Fourier harmonic uses more axes than the base has");
        }
      }
    }
  }

 private:
  static constexpr std::int64_t kMaxTabulatedHarmonic = 32;

  void prepare() {
    sup_bound_ = std::visit(
        [](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantRho>) {
            check_fiber_dim(static_cast<int>(f.value.size()));
            return f.value.norm();
          } else if constexpr (std::is_same_v<T, FourierRho>) {
            double s = 0.0;
            for (const auto& t : f.terms) s += std::abs(t.coeff);
            return s;
          } else if constexpr (std::is_same_v<T, TableRho>) {
            if (f.values.empty()) throw InvalidInput("empty vector table");
            double s = 0.0;
            for (const auto& v : f.values) {
              if (v.size() != f.values.front().size()) throw InvalidInput("vector table with mixed dimensions");
              s = std::max(s, v.norm());
            }
            check_fiber_dim(static_cast<int>(f.values.front().size()));
            return s;
          } else {
            if (!f.frame) throw InvalidInput("frame_inverse needs a frame");
            if (f.frame->dim() != f.e.size()) throw DimensionMismatch("frame_inverse", f.frame->dim(), static_cast<int>(f.e.size()));
            return f.e.norm();
          }
        },
        v_);
    if (const auto* fr = std::get_if<FourierRho>(&v_)) {
      for (const auto& t : fr->terms) {
        for (auto k : t.k) max_harmonic_ = std::max<std::int64_t>(max_harmonic_, k < 0 ? -k : k);
      }
    }
  }

  std::complex<double> eval_fourier(const FourierRho& f, const BasePoint& x) const {
    const int axes = x.kind() == BaseKind::torus ? x.dim() : 1;
    if (max_harmonic_ <= kMaxTabulatedHarmonic) {
      // Powers of e^{2 pi i t} per axis; one sincos per axis per evaluation.
      constexpr std::size_t width = 2 * kMaxTabulatedHarmonic + 1;
      std::array<std::array<std::complex<double>, width>, kMaxTorusDim> pw;
      const auto K = static_cast<std::size_t>(max_harmonic_);
      for (int a = 0; a < axes; ++a) {
        const double t = x.phase(a);
        const std::complex<double> w(std::cos(kTwoPi * t), std::sin(kTwoPi * t));
        auto& row = pw[static_cast<std::size_t>(a)];
        row[K] = 1.0;
        for (std::size_t j = 1; j <= K; ++j) {
          row[K + j] = row[K + j - 1] * w;
          row[K - j] = std::conj(row[K + j]);
        }
      }
      std::complex<double> s = 0.0;
      for (const auto& term : f.terms) {
        std::complex<double> e = term.coeff;
        for (int a = 0; a < axes; ++a) {
          e *= pw[static_cast<std::size_t>(a)][static_cast<std::size_t>(static_cast<std::int64_t>(K) + term.k[a])];
        }
        s += e;
      }
      return s;
    }
    std::complex<double> s = 0.0;
    for (const auto& term : f.terms) {
      double arg = 0.0;
      for (int a = 0; a < axes; ++a) arg += static_cast<double>(term.k[a]) * x.phase(a);
      arg = kTwoPi * detail::wrap_turns(arg);
      s += term.coeff * std::complex<double>(std::cos(arg), std::sin(arg));
    }
    return s;
  }

  Variant v_;
  double sup_bound_ = 0.0;
  std::int64_t max_harmonic_ = 0;
};

}  // namespace cocycle_forge
