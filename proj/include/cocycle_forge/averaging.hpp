#pragma once

// Twisted Birkhoff sums z_j(x) = F(x) F(Tx) ... F(T^{j-1} x) f(T^j x), their Cesaro
// means, Abel (exponential) means, and numeric Abel/Cesaro comparators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cocycle_forge/base_dynamics.hpp"
#include "cocycle_forge/compensated_sum.hpp"
#include "cocycle_forge/isometry.hpp"
#include "cocycle_forge/product.hpp"

namespace cocycle_forge {

using VectorSum = CompensatedVectorSum<FiberVector>;

/// Smallest N >= 1 with lambda^N * sup / (1 - lambda) <= eps: the tail bound of
/// sum_{j >= N} lambda^j |a_j| for terms bounded by `sup`.
inline std::int64_t series_truncation(double lambda, double sup, double eps) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw InvalidInput("lambda must lie in [0, 1)");
  if (!(eps > 0.0)) throw InvalidInput("tail tolerance must be positive");
  if (lambda == 0.0 || sup <= 0.0) return 1;
  const double target = eps * (1.0 - lambda) / sup;
  if (target >= 1.0) return 1;
  const double n = std::ceil(std::log(target) / std::log(lambda));
  if (!(n < 1e9)) throw InvalidInput("series truncation exceeds 1e9 terms; lambda too close to 1 for eps");
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(n));
}

/// Truncation for unit-mass exponential means: the truncated weights are
/// renormalized to total mass one, which costs at most 2 lambda^N sup, so N is chosen
/// with lambda^N sup <= eps * min(1 - lambda, 1/2).
inline std::int64_t mean_truncation(double lambda, double sup, double eps) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw InvalidInput("lambda must lie in [0, 1)");
  if (!(eps > 0.0)) throw InvalidInput("tail tolerance must be positive");
  if (lambda == 0.0 || sup <= 0.0) return 1;
  const double target = eps * std::min(1.0 - lambda, 0.5) / sup;
  if (target >= 1.0) return 1;
  const double n = std::ceil(std::log(target) / std::log(lambda));
  if (!(n < 1e9)) throw InvalidInput("mean truncation exceeds 1e9 terms; lambda too close to 1 for eps");
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(n));
}

/// lambda^j for consecutive j; re-anchored with pow() every 1024 steps.
class GeometricWeights {
 public:
  explicit GeometricWeights(double lambda) : lambda_(lambda) {}
  double value() const noexcept { return w_; }
  void advance() {
    ++j_;
    w_ = (j_ % 1024 == 0) ? std::pow(lambda_, static_cast<double>(j_)) : w_ * lambda_;
  }

 private:
  double lambda_;
  double w_ = 1.0;
  std::int64_t j_ = 0;
};

/// The trivial twist on R^l.
struct IdentityTwist {
  int l;
  int dim() const noexcept { return l; }
  bool planar() const noexcept { return l == 2; }
  std::complex<double> planar_value(const BasePoint&) const noexcept { return {1.0, 0.0}; }
  OrthogonalMap operator()(const BasePoint&) const { return OrthogonalMap::identity(l); }
};

/// Generator of z_j(x) = F(x) ... F(T^{j-1} x) f(T^j x); z_0 = f(x).
/// `f_sup` must bound sup_X |f|; every |z_j| is bounded by it.
template <TwistMap Twist, Observable Obs>
class TwistedSequence {
 public:
  TwistedSequence(BaseSystem base, Twist twist, Obs f, double f_sup)
      : base_(std::move(base)), twist_(std::move(twist)), f_(std::move(f)), sup_(f_sup) {}

  class Cursor {
   public:
    Cursor(const TwistedSequence& seq, const BasePoint& x)
        : seq_(&seq), x_(x), y_(x), prod_(seq.twist_.dim(), planar_of(seq.twist_)) {}

    FiberVector value() const { return prod_.apply(FiberVector(seq_->f_(y_))); }
    void advance() {
      prod_.right_multiply(seq_->twist_, y_);
      ++j_;
      y_ = cocycle_forge::step(seq_->base_, x_, j_);
    }
    std::int64_t index() const noexcept { return j_; }
    const BasePoint& point() const noexcept { return y_; }

   private:
    static bool planar_of(const Twist& t) {
      if constexpr (PlanarTwistMap<Twist>) return t.planar();
      return false;
    }

    const TwistedSequence* seq_;
    BasePoint x_;
    BasePoint y_;
    OrthogonalProduct prod_;
    std::int64_t j_ = 0;
  };

  Cursor start(const BasePoint& x) const { return Cursor(*this, x); }
  double sup_bound() const noexcept { return sup_; }
  int dim() const { return twist_.dim(); }
  const BaseSystem& base() const noexcept { return base_; }
  const Twist& twist() const noexcept { return twist_; }
  const Obs& observable() const noexcept { return f_; }

 private:
  BaseSystem base_;
  Twist twist_;
  Obs f_;
  double sup_;
};

/// A plain sequence j -> z_j that does not depend on the base point; used for the
/// summability comparators on scalar test sequences.
template <class Fn>
class IndexedSequence {
 public:
  IndexedSequence(int dim, Fn fn, double sup = std::numeric_limits<double>::infinity())
      : dim_(dim), fn_(std::move(fn)), sup_(sup) {}

  class Cursor {
   public:
    explicit Cursor(const IndexedSequence& s) : s_(&s) {}
    FiberVector value() const { return s_->fn_(j_); }
    void advance() noexcept { ++j_; }
    std::int64_t index() const noexcept { return j_; }

   private:
    const IndexedSequence* s_;
    std::int64_t j_ = 0;
  };

  Cursor start(const BasePoint&) const { return Cursor(*this); }
  double sup_bound() const noexcept { return sup_; }
  int dim() const noexcept { return dim_; }

 private:
  int dim_;
  Fn fn_;
  double sup_;
};

template <class S>
concept SequenceSource = requires(const S& s, const BasePoint& x) {
  { s.sup_bound() } -> std::convertible_to<double>;
  { s.dim() } -> std::convertible_to<int>;
  { s.start(x).value() } -> std::convertible_to<FiberVector>;
  s.start(x).advance();
};

/// (1/N) sum_{j<N} z_j(x).
template <SequenceSource S>
FiberVector cesaro_twisted(const S& seq, const BasePoint& x, std::int64_t N) {
  if (N < 1) throw InvalidInput("Cesaro mean needs N >= 1");
  auto c = seq.start(x);
  VectorSum sum(seq.dim());
  for (std::int64_t j = 0; j < N; ++j) {
    sum.add(c.value());
    if (j + 1 < N) c.advance();
  }
  return sum.value() / static_cast<double>(N);
}

/// (1 - lambda) sum_j lambda^j z_j(x), truncated so the tail is below eps_tail; the
/// truncated weights are renormalized to mass one, so constants are reproduced exactly.
template <SequenceSource S>
FiberVector abel_twisted(const S& seq, const BasePoint& x, double lambda, double eps_tail) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw InvalidInput("Abel mean needs lambda in [0, 1)");
  const double sup = seq.sup_bound();
  if (!std::isfinite(sup)) throw InvalidInput("Abel mean needs a finite bound on the sequence");
  const std::int64_t n = mean_truncation(lambda, sup, eps_tail);
  auto c = seq.start(x);
  VectorSum sum(seq.dim());
  CompensatedSum mass;
  GeometricWeights w(lambda);
  for (std::int64_t j = 0; j < n; ++j) {
    sum.add_scaled(w.value(), c.value());
    mass += w.value();
    if (j + 1 < n) {
      c.advance();
      w.advance();
    }
  }
  return sum.value() / mass.value();
}

/// Untwisted lambda-average S_lambda(f, x) = (1 - lambda) sum_j lambda^j f(T^j x).
template <Observable Obs>
FiberVector exp_average(const BaseSystem& sys, const Obs& f, double f_sup, const BasePoint& x, double lambda,
                        double eps_tail) {
  const int l = static_cast<int>(FiberVector(f(x)).size());
  TwistedSequence seq(sys, IdentityTwist{l}, f, f_sup);
  return abel_twisted(seq, x, lambda, eps_tail);
}

/// Paired Abel/Cesaro data along the schedule lambda_k = 1 - 1/N_k.
struct AveragingReport {
  std::vector<std::int64_t> n;
  std::vector<double> lambda;
  std::vector<FiberVector> cesaro;
  std::vector<FiberVector> abel;
  /// |abel(lambda_k) - cesaro(N_k)|.
  std::vector<double> discrepancy;
  /// sup over N_k <= m <= 2 N_k of |sigma_m - L|, with L the supplied limit or, when
  /// none is given, sigma at 2 max N.
  std::vector<double> envelope;
  /// max(factor * envelope_k, floor) from the probe tolerance.
  std::vector<double> tolerance;
  double max_discrepancy = 0.0;
  double observed_sup = 0.0;
  bool bounded = true;
  /// Every discrepancy is within its tolerance.
  bool tracks = true;
};

struct ProbeTolerance {
  double envelope_factor = 10.0;
  double floor = 1e-12;
};

namespace detail {

template <SequenceSource S>
AveragingReport compare_summability(const S& seq, const BasePoint& x, std::span<const std::int64_t> schedule,
                                    const std::optional<FiberVector>& limit, double eps_tail, ProbeTolerance tol,
                                    bool abel_envelope) {
  if (schedule.empty()) throw InvalidInput("empty N schedule");
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    if (schedule[k] < 2) throw InvalidInput("N schedule entries must be >= 2");
    if (k > 0 && schedule[k] <= schedule[k - 1]) throw InvalidInput("N schedule must be increasing");
  }
  const std::int64_t n_max = schedule.back();
  const std::int64_t horizon = 2 * n_max;

  // Running Cesaro means sigma_m for m = 1 .. 2 N_max.
  std::vector<FiberVector> sigma;
  sigma.reserve(static_cast<std::size_t>(horizon));
  double first_half_sup = 0.0;
  double second_half_sup = 0.0;
  {
    auto c = seq.start(x);
    VectorSum sum(seq.dim());
    for (std::int64_t j = 0; j < horizon; ++j) {
      const FiberVector z = c.value();
      const double nz = z.norm();
      double& half = j < n_max ? first_half_sup : second_half_sup;
      half = std::max(half, nz);
      sum.add(z);
      sigma.push_back(sum.value() / static_cast<double>(j + 1));
      if (j + 1 < horizon) c.advance();
    }
  }

  AveragingReport r;
  r.observed_sup = std::max(first_half_sup, second_half_sup);
  const double declared = seq.sup_bound();
  if (std::isfinite(declared)) {
    r.bounded = r.observed_sup <= declared * (1.0 + 1e-9) + 1e-300;
  } else {
    r.bounded = second_half_sup <= 2.0 * first_half_sup + 1e-300;
  }
  const double sup_for_abel = std::isfinite(declared) ? declared : r.observed_sup;

  const FiberVector target = limit ? *limit : sigma.back();
  for (const auto N : schedule) {
    const double lam = 1.0 - 1.0 / static_cast<double>(N);
    r.n.push_back(N);
    r.lambda.push_back(lam);
    r.cesaro.push_back(sigma[static_cast<std::size_t>(N - 1)]);
    double env = 0.0;
    for (std::int64_t m = N; m <= 2 * N; ++m) env = std::max(env, (sigma[static_cast<std::size_t>(m - 1)] - target).norm());
    FiberVector a;
    {
      const std::int64_t n_terms = mean_truncation(lam, sup_for_abel, eps_tail);
      auto c = seq.start(x);
      VectorSum sum(seq.dim());
      CompensatedSum mass;
      GeometricWeights w(lam);
      for (std::int64_t j = 0; j < n_terms; ++j) {
        sum.add_scaled(w.value(), c.value());
        mass += w.value();
        if (j + 1 < n_terms) {
          c.advance();
          w.advance();
        }
      }
      a = sum.value() / mass.value();
    }
    if (abel_envelope) env = std::max(env, (a - target).norm());
    r.abel.push_back(a);
    r.envelope.push_back(env);
    const double d = (a - r.cesaro.back()).norm();
    r.discrepancy.push_back(d);
    r.tolerance.push_back(std::max(tol.envelope_factor * env, tol.floor));
    r.max_discrepancy = std::max(r.max_discrepancy, d);
    if (d > r.tolerance.back()) r.tracks = false;
  }
  return r;
}

}  // namespace detail

/// Cesaro-to-Abel direction: for a Cesaro-convergent sequence the Abel means along
/// lambda_k = 1 - 1/N_k must approach the Cesaro means. `limit`, when known, anchors
/// the envelope.
template <SequenceSource S>
AveragingReport frobenius_compare(const S& seq, const BasePoint& x, std::span<const std::int64_t> schedule,
                                  std::optional<FiberVector> limit = std::nullopt, double eps_tail = 1e-13,
                                  ProbeTolerance tol = {}) {
  return detail::compare_summability(seq, x, schedule, limit, eps_tail, tol, false);
}

/// Abel-to-Cesaro direction (numeric diagnostic only): reports whether Cesaro means
/// track the Abel means, widening the envelope by the Abel-side deviation. `bounded`
/// is cleared when the observed terms exceed the declared bound, or (for undeclared
/// bounds) when they more than double between the two halves of the horizon.
template <SequenceSource S>
AveragingReport tauberian_probe(const S& seq, const BasePoint& x, std::span<const std::int64_t> schedule,
                                std::optional<FiberVector> limit = std::nullopt, double eps_tail = 1e-13,
                                ProbeTolerance tol = {}) {
  auto r = detail::compare_summability(seq, x, schedule, limit, eps_tail, tol, true);
  if (!r.bounded) r.tracks = false;
  return r;
}

/// Grid-L2 distance between the N-th and 2N-th twisted Cesaro means; a Cauchy
/// probe for mean convergence under U f(x) = F(x) f(Tx).
template <SequenceSource S>
double von_neumann_residual(const S& seq, const SampleGrid& grid, std::int64_t N) {
  if (N < 1) throw InvalidInput("von Neumann residual needs N >= 1");
  if (grid.size() == 0) throw InvalidInput("empty grid");
  CompensatedSum acc;
  for (const auto& x : grid.points) {
    auto c = seq.start(x);
    VectorSum s(seq.dim());
    FiberVector at_n;
    for (std::int64_t j = 0; j < 2 * N; ++j) {
      s.add(c.value());
      if (j + 1 == N) at_n = s.value() / static_cast<double>(N);
      if (j + 1 < 2 * N) c.advance();
    }
    const FiberVector at_2n = s.value() / static_cast<double>(2 * N);
    acc += (at_n - at_2n).squaredNorm();
  }
  return std::sqrt(acc.value() / static_cast<double>(grid.size()));
}

}  // namespace cocycle_forge
