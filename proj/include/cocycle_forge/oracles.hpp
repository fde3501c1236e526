#pragma once

// Exact reference solvers (Fourier for the planar vortex, dense linear algebra on
// finite cyclic bases) and structural checks for invariant functions and sections.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "cocycle_forge/base_dynamics.hpp"
#include "cocycle_forge/cocycle.hpp"
#include "cocycle_forge/fields.hpp"
#include "cocycle_forge/isometry.hpp"
#include "cocycle_forge/product.hpp"

namespace cocycle_forge {

struct FourierHarmonic {
  std::int64_t k = 0;
  std::complex<double> rho;
  /// lambda e^{2 pi i k alpha} - e^{i beta}.
  std::complex<double> denominator;
  /// rho / denominator; zero when rejected.
  std::complex<double> u;
  bool retained = false;
};

/// Solution of lambda u(theta + alpha) - e^{i beta} u(theta) = rho(theta) harmonic by
/// harmonic; lambda = 1 is the untwisted-limit equation.
struct FourierOracle {
  double alpha = 0.0;
  double beta = 0.0;
  double lambda = 1.0;
  double denom_threshold = 0.0;
  std::vector<FourierHarmonic> harmonics;
  /// min_k |lambda e^{2 pi i k alpha} - e^{i beta}| over the support (infinity if empty).
  double min_denominator = std::numeric_limits<double>::infinity();
  std::vector<std::int64_t> rejected;

  bool complete() const noexcept { return rejected.empty(); }

  /// The solution as a registry field; throws SmallDenominator if any harmonic was rejected.
  VectorField solution() const {
    if (!complete()) throw SmallDenominator(rejected);
    std::vector<std::pair<std::int64_t, std::complex<double>>> terms;
    for (const auto& h : harmonics) terms.emplace_back(h.k, h.u);
    if (terms.empty()) return VectorField::zero(2);
    return VectorField::fourier_circle(terms);
  }

  /// Sum over retained harmonics at theta (turns).
  std::complex<double> operator()(double theta) const {
    std::complex<double> s = 0.0;
    for (const auto& h : harmonics) {
      if (!h.retained) continue;
      s += h.u * std::polar(1.0, kTwoPi * detail::wrap_turns(static_cast<double>(h.k) * theta));
    }
    return s;
  }
};

inline FourierOracle fourier_solve(double alpha, double beta,
                                   const std::vector<std::pair<std::int64_t, std::complex<double>>>& rho_hat,
                                   double denom_threshold = 1e-8, double lambda = 1.0) {
  if (!(denom_threshold >= 0.0)) throw InvalidInput("denominator threshold must be nonnegative");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw InvalidInput("Fourier oracle needs lambda in (0, 1]");
  FourierOracle o;
  o.alpha = alpha;
  o.beta = beta;
  o.lambda = lambda;
  o.denom_threshold = denom_threshold;
  const std::complex<double> eb = std::polar(1.0, beta);
  for (const auto& [k, c] : rho_hat) {
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) throw InvalidInput("non-finite Fourier coefficient");
    FourierHarmonic h;
    h.k = k;
    h.rho = c;
    h.denominator = std::polar(lambda, kTwoPi * detail::wrap_turns(static_cast<double>(k) * alpha)) - eb;
    const double mag = std::abs(h.denominator);
    o.min_denominator = std::min(o.min_denominator, mag);
    if (mag < denom_threshold || mag == 0.0) {
      o.rejected.push_back(k);
    } else {
      h.u = c / h.denominator;
      h.retained = true;
    }
    o.harmonics.push_back(h);
  }
  return o;
}

/// Dense solution of lambda u(T x) - Psi(x) u(x) = rho(x) on a finite cyclic base.
/// `residual` is measured on the equation in this original form.
struct CyclicOracle {
  std::int64_t period = 0;
  int dim = 0;
  double lambda = 0.0;
  std::vector<FiberVector> solution;
  /// max over states of |lambda u(i+1) - Psi_i u(i) - rho_i|.
  double residual = 0.0;
  double condition_number = 0.0;
  /// Number of singular values below 1e-10 times the largest.
  int kernel_dim = 0;
  bool singular = false;
  /// For singular systems: whether rho lies in the range (least-squares residual small).
  bool solvable = true;

  FiberVector operator()(const BasePoint& x) const { return solution.at(static_cast<std::size_t>(x.index())); }
  VectorField as_field() const { return VectorField::table(solution); }
};

/// For lambda < 1 the system is a strict contraction and always uniquely solvable.
/// For lambda = 1 a kernel is reported, never regularized away: the minimum-norm
/// solution (orthogonal to the kernel; the zero-mean one when Psi is trivial) is
/// returned together with the solvability flag.
inline CyclicOracle cyclic_solve(const CocycleSpec& spec, double lambda) {
  if (spec.base().kind() != BaseKind::finite_cyclic) throw InvalidInput("cyclic oracle needs a finite cyclic base");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw InvalidInput("cyclic oracle needs lambda in (0, 1]");
  const std::int64_t p = spec.base().period();
  const int l = spec.dim();
  const Eigen::Index n = static_cast<Eigen::Index>(p) * l;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b(n);
  for (std::int64_t i = 0; i < p; ++i) {
    const BasePoint x = BasePoint::cyclic(i, p);
    const Eigen::Index row = static_cast<Eigen::Index>(i) * l;
    const Eigen::Index next = static_cast<Eigen::Index>((i + 1) % p) * l;
    // Row i is Psi_i^{-1} (lambda u_{i+1} - Psi_i u_i - rho_i) = 0, with the inverse
    // taken as the transpose exactly as in the series.
    const OrthogonalMap inv = spec.psi()(x).inverse();
    a.block(row, row, l, l) -= Eigen::MatrixXd::Identity(l, l);
    a.block(row, next, l, l) += lambda * inv.matrix();
    b.segment(row, l) = inv * FiberVector(spec.rho()(x));
  }

  CyclicOracle o;
  o.period = p;
  o.dim = l;
  o.lambda = lambda;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  o.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) <= 1e-10 * smax) ++o.kernel_dim;
  }
  o.singular = o.kernel_dim > 0;

  Eigen::VectorXd u;
  if (!o.singular) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    u = lu.solve(b);
    // Iterative refinement with residuals accumulated in extended precision.
    for (int it = 0; it < 3; ++it) {
      Eigen::VectorXd r(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        long double acc = b(i);
        for (Eigen::Index j = 0; j < n; ++j) acc -= static_cast<long double>(a(i, j)) * u(j);
        r(i) = static_cast<double>(acc);
      }
      u += lu.solve(r);
    }
  } else {
    svd.setThreshold(1e-10);
    u = svd.solve(b);
    // Remove any kernel component reintroduced by rounding.
    const Eigen::MatrixXd& v = svd.matrixV();
    for (Eigen::Index i = sv.size() - o.kernel_dim; i < sv.size(); ++i) u -= v.col(i).dot(u) * v.col(i);
  }

  o.solution.reserve(static_cast<std::size_t>(p));
  for (std::int64_t i = 0; i < p; ++i) o.solution.emplace_back(u.segment(static_cast<Eigen::Index>(i) * l, l));
  for (std::int64_t i = 0; i < p; ++i) {
    const BasePoint x = BasePoint::cyclic(i, p);
    const FiberVector& ui = o.solution[static_cast<std::size_t>(i)];
    const FiberVector& un = o.solution[static_cast<std::size_t>((i + 1) % p)];
    o.residual = std::max(o.residual, (lambda * un - spec.psi()(x) * ui - spec.rho()(x)).norm());
  }
  o.solvable = !o.singular || o.residual <= 1e-10 * (1.0 + b.norm());
  return o;
}

/// sup_grid |f(Tx) - F(x)^{-1} f(x)|: zero certifies (on the grid) an invariant
/// function of the twisted extension.
template <TwistMap Twist, Observable F>
double verify_invariant_function(const BaseSystem& sys, const Twist& twist, const F& f, const SampleGrid& grid) {
  double r = 0.0;
  for (const auto& x : grid.points) {
    const FiberVector lhs = f(step(sys, x, 1));
    const FiberVector rhs = OrthogonalMap(twist(x)).inverse() * FiberVector(f(x));
    r = std::max(r, (lhs - rhs).norm());
  }
  return r;
}

/// Spectral-norm residual of X(Tx) = X(x) F(x) over the grid.
template <TwistMap Frame, TwistMap Twist>
double section_residual(const BaseSystem& sys, const Frame& frame, const Twist& twist, const SampleGrid& grid) {
  double r = 0.0;
  for (const auto& x : grid.points) {
    const FiberMatrix d = OrthogonalMap(frame(step(sys, x, 1))).matrix() -
                          OrthogonalMap(frame(x)).matrix() * OrthogonalMap(twist(x)).matrix();
    const Eigen::MatrixXd dm = d;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(dm);
    r = std::max(r, svd.singularValues()(0));
  }
  return r;
}

struct SectionFunctionCheck {
  /// f(x) = X(x)^{-1} e.
  VectorField f;
  double section_residual = 0.0;
  double function_residual = 0.0;
  /// section_residual <= tol implies function_residual <= tol (vacuous otherwise).
  bool chain_holds = true;
};

/// Builds f = X^{-1} e from a candidate invariant section X and checks both
/// X(Tx) = X(x) F(x) and f(Tx) = F(x)^{-1} f(x) on the grid.
inline SectionFunctionCheck verify_section_to_function(const BaseSystem& sys, const OrthogonalField& twist,
                                                       const OrthogonalField& frame, const FiberVector& e,
                                                       const SampleGrid& grid, double tol = 1e-12) {
  if (e.size() != frame.dim()) throw DimensionMismatch("section vector", frame.dim(), static_cast<int>(e.size()));
  if (twist.dim() != frame.dim()) throw DimensionMismatch("section twist", frame.dim(), twist.dim());
  if (e.norm() == 0.0) throw InvalidInput("section-to-function needs e != 0");
  SectionFunctionCheck c{VectorField::frame_inverse(frame, e)};
  c.section_residual = section_residual(sys, frame, twist, grid);
  c.function_residual = verify_invariant_function(sys, twist, c.f, grid);
  c.chain_holds = !(c.section_residual <= tol) || c.function_residual <= tol;
  return c;
}

/// h(x) = X(x)^{-1} c with c the grid average of X(x) f(x): the limit of the
/// twisted Birkhoff means when X is an invariant section.
struct LimitFunction {
  std::shared_ptr<const OrthogonalField> frame;
  FiberVector c;
  FiberVector operator()(const BasePoint& x) const { return (*frame)(x).inverse() * c; }
};

template <Observable F>
LimitFunction limit_function_h(const OrthogonalField& frame, const F& f, const SampleGrid& grid) {
  if (grid.size() == 0) throw InvalidInput("empty quadrature grid");
  CompensatedVectorSum<FiberVector> sum(frame.dim());
  for (const auto& x : grid.points) sum.add(frame(x) * FiberVector(f(x)));
  return {std::make_shared<const OrthogonalField>(frame), sum.value() / static_cast<double>(grid.size())};
}

}  // namespace cocycle_forge
