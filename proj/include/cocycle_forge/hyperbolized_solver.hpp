#pragma once

// u_lambda from the series u_lambda(x) = -sum_j lambda^j Psi(x)^{-1}...Psi(T^j x)^{-1} rho(T^j x),
// residuals of lambda u(Tx) - Psi(x) u(x) = rho(x), the operator S_lambda and lambda sweeps.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cocycle_forge/averaging.hpp"
#include "cocycle_forge/cocycle.hpp"
#include "cocycle_forge/compensated_sum.hpp"
#include "cocycle_forge/parallel.hpp"

namespace cocycle_forge {

using SectionFn = std::function<FiberVector(const BasePoint&)>;

/// A map X -> R^l sampled on a grid. `evaluator` re-evaluates it anywhere on X
/// (closed form or by re-running the series), which is how u(Tx) is obtained.
struct Section {
  SampleGrid grid;
  std::vector<FiberVector> values;
  SectionFn evaluator;
  double tolerance = 0.0;
  std::optional<double> lambda;
  /// max over the stored values.
  double sup_norm = 0.0;
  /// Analytic bound on sup_X |u| (infinity when unknown).
  double sup_bound = std::numeric_limits<double>::infinity();

  FiberVector operator()(const BasePoint& x) const {
    if (!evaluator) throw InvalidInput("section has no evaluator");
    return evaluator(x);
  }

  /// Samples `fn` on `grid`.
  static Section sample(SampleGrid grid, SectionFn fn, unsigned threads = 1) {
    Section s;
    s.values.resize(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t i) { s.values[i] = fn(grid[i]); });
    for (const auto& v : s.values) {
      if (!v.allFinite()) throw Error("section value is not finite");
      s.sup_norm = std::max(s.sup_norm, v.norm());
    }
    s.grid = std::move(grid);
    s.evaluator = std::move(fn);
    return s;
  }
};

inline void check_lambda_series(double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0)) {
    throw InvalidInput("lambda must lie in [0, 1), got " + std::to_string(lambda));
  }
}

/// The truncated series at a single point; tail <= eps. The orthogonal products and
/// the weighted sum are carried in long double: over the ~1/(1 - lambda) effective
/// terms double rounding alone would cost about 1e-14 relative.
inline FiberVector evaluate_u_lambda(const CocycleSpec& spec, double lambda, const BasePoint& x, double eps) {
  using real = long double;
  check_lambda_series(lambda);
  const std::int64_t n = series_truncation(lambda, spec.rho_sup(), eps);
  GeometricWeights w(lambda);
  if (spec.psi().planar()) {
    std::complex<real> p{1.0L, 0.0L};
    std::complex<real> sum{0.0L, 0.0L};
    for (std::int64_t j = 0; j < n; ++j) {
      const BasePoint y = spec.step(x, j);
      p *= std::complex<real>(std::conj(spec.psi().planar_value(y)));
      if ((j + 1) % kReorthonormalizePeriod == 0) p /= std::abs(p);
      sum += static_cast<real>(w.value()) * (p * std::complex<real>(to_complex(spec.rho()(y))));
      w.advance();
    }
    return from_complex(std::complex<double>(-sum));
  }
  using Mat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxFiberDim, kMaxFiberDim>;
  using Vec = Eigen::Matrix<real, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxFiberDim, 1>;
  const int l = spec.dim();
  Mat p = Mat::Identity(l, l);
  Vec sum = Vec::Zero(l);
  for (std::int64_t j = 0; j < n; ++j) {
    const BasePoint y = spec.step(x, j);
    p = p * spec.psi()(y).matrix().transpose().cast<real>();
    if ((j + 1) % kReorthonormalizePeriod == 0) {
      // Two Gram-Schmidt passes on the columns.
      for (int pass = 0; pass < 2; ++pass) {
        for (int c = 0; c < l; ++c) {
          for (int k = 0; k < c; ++k) p.col(c) -= p.col(k).dot(p.col(c)) * p.col(k);
          p.col(c) /= p.col(c).norm();
        }
      }
    }
    sum += static_cast<real>(w.value()) * (p * spec.rho()(y).cast<real>());
    w.advance();
  }
  return (-sum).cast<double>();
}

/// Independent route to u_lambda(x): pull (T^N x, 0) back N times with G_lambda.
/// Since u_lambda is the global attractor of G_lambda the error is
/// lambda^N |u_lambda(T^N x)|, below eps for the series truncation N.
inline FiberVector evaluate_u_lambda_backward(const CocycleSpec& spec, double lambda, const BasePoint& x,
                                              double eps) {
  check_lambda_series(lambda);
  const std::int64_t n = series_truncation(lambda, spec.rho_sup(), eps);
  FiberVector v = FiberVector::Zero(spec.dim());
  for (std::int64_t k = n - 1; k >= 0; --k) {
    const BasePoint y = spec.step(x, k);
    v = spec.psi()(y).inverse() * (lambda * v - spec.rho()(y));
  }
  return v;
}

/// u_lambda on `grid`, tail <= eps at every point.
inline Section solve_u_lambda(std::shared_ptr<const CocycleSpec> spec, double lambda, SampleGrid grid, double eps,
                              unsigned threads = 1) {
  check_lambda_series(lambda);
  if (!(eps > 0.0)) throw InvalidInput("eps must be positive");
  for (const auto& x : grid.points) {
    if (!spec->base().contains(x)) throw InvalidInput("grid point outside the base");
  }
  SectionFn fn = [spec, lambda, eps](const BasePoint& x) { return evaluate_u_lambda(*spec, lambda, x, eps); };
  Section s = Section::sample(std::move(grid), std::move(fn), threads);
  s.tolerance = eps;
  s.lambda = lambda;
  s.sup_bound = spec->rho_sup() / (1.0 - lambda) + eps;
  return s;
}

inline Section solve_u_lambda(const CocycleSpec& spec, double lambda, SampleGrid grid, double eps,
                              unsigned threads = 1) {
  return solve_u_lambda(std::make_shared<const CocycleSpec>(spec), lambda, std::move(grid), eps, threads);
}

struct ResidualReport {
  /// sup over the grid of |lambda u(Tx) - Psi(x) u(x) - rho(x)|.
  double sup = 0.0;
  /// sup over the grid of |u(Tx)|.
  double image_sup = 0.0;
  /// sup over the grid of |u(x)|.
  double section_sup = 0.0;
};

/// Residual of the hyperbolized equation at lambda (lambda = 1 gives the genuine
/// twisted cohomological equation). u(x) comes from the stored values, u(Tx) from
/// the evaluator.
inline ResidualReport residual_report(const CocycleSpec& spec, double lambda, const Section& u, unsigned threads = 1) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("residual needs lambda in [0, 1]");
  if (u.values.size() != u.grid.size()) throw InvalidInput("section values do not match its grid");
  const std::size_t m = u.grid.size();
  std::vector<double> res(m), img(m);
  parallel_for(m, threads, [&](std::size_t i) {
    const BasePoint& x = u.grid[i];
    const FiberVector image = u(spec.step(x, 1));
    if (image.size() != spec.dim()) throw DimensionMismatch("residual", spec.dim(), static_cast<int>(image.size()));
    res[i] = (lambda * image - spec.psi()(x) * u.values[i] - spec.rho()(x)).norm();
    img[i] = image.norm();
  });
  ResidualReport r;
  for (std::size_t i = 0; i < m; ++i) {
    r.sup = std::max(r.sup, res[i]);
    r.image_sup = std::max(r.image_sup, img[i]);
    r.section_sup = std::max(r.section_sup, u.values[i].norm());
  }
  return r;
}

inline double residual(const CocycleSpec& spec, double lambda, const Section& u, unsigned threads = 1) {
  return residual_report(spec, lambda, u, threads).sup;
}

/// S_lambda(f, x) = (1 - lambda) sum_j lambda^j Psi(x)^{-1}...Psi(T^j x)^{-1} f(T^{j+1} x),
/// tail <= eps. `f_sup` bounds sup_X |f|.
template <Observable F>
FiberVector script_S(const CocycleSpec& spec, double lambda, const F& f, double f_sup, const BasePoint& x,
                     double eps) {
  check_lambda_open(lambda);
  const BaseSystem& base = spec.base();
  const OrthogonalField& psi = spec.psi();
  auto obs = [&](const BasePoint& y) -> FiberVector { return psi(y).inverse() * FiberVector(f(step(base, y, 1))); };
  TwistedSequence seq(base, InverseField(psi), obs, f_sup);
  return abel_twisted(seq, x, lambda, eps);
}

/// sup over `grid` of |S_lambda(u, .)| for each lambda; a trend to 0 indicates
/// uniform exponential zero mean.
template <Observable F>
std::vector<double> zero_mean_test(const CocycleSpec& spec, const F& u, double u_sup, std::span<const double> lambdas,
                                   const SampleGrid& grid, double eps, unsigned threads = 1) {
  std::vector<double> out;
  for (const double lambda : lambdas) {
    std::vector<double> vals(grid.size());
    parallel_for(grid.size(), threads,
                 [&](std::size_t i) { vals[i] = script_S(spec, lambda, u, u_sup, grid[i], eps).norm(); });
    out.push_back(vals.empty() ? 0.0 : *std::max_element(vals.begin(), vals.end()));
  }
  return out;
}

inline const std::vector<double>& default_lambda_schedule() {
  static const std::vector<double> s{0.9, 0.99, 0.999, 0.9999};
  return s;
}

inline void check_lambda_schedule(std::span<const double> lambdas) {
  if (lambdas.empty()) throw InvalidInput("empty lambda schedule");
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (!(lambdas[k] > 0.0 && lambdas[k] < 1.0)) throw InvalidInput("lambda schedule entries must lie in (0, 1)");
    if (k > 0 && !(lambdas[k] > lambdas[k - 1])) throw InvalidInput("lambda schedule must be strictly increasing");
  }
}

struct SweepEntry {
  double lambda = 0.0;
  Section u;
  double residual_lambda = 0.0;
  double residual_one = 0.0;
  /// sup over the grid of |u(Tx)|.
  double image_sup = 0.0;
  std::optional<double> dist_sup;
  std::optional<double> dist_l1;
  std::optional<double> dist_l2;
};

struct LambdaSweep {
  std::vector<SweepEntry> entries;
  /// Sup distances to the oracle strictly decrease along the schedule (false
  /// without an oracle).
  bool decreasing = false;
};

/// u_lambda for each lambda, with residuals at lambda and at 1, and grid sup/L1/L2
/// distances to `oracle` when one is supplied.
inline LambdaSweep sweep(std::shared_ptr<const CocycleSpec> spec, std::span<const double> lambdas,
                         const SampleGrid& grid, double eps, const SectionFn& oracle = {}, unsigned threads = 1) {
  check_lambda_schedule(lambdas);
  LambdaSweep out;
  std::vector<FiberVector> reference;
  if (oracle) {
    reference.reserve(grid.size());
    for (const auto& x : grid.points) reference.push_back(oracle(x));
  }
  for (const double lambda : lambdas) {
    SweepEntry e;
    e.lambda = lambda;
    e.u = solve_u_lambda(spec, lambda, grid, eps, threads);
    // One pass computes u(Tx); the residual at 1 differs only by the factor on u(Tx).
    const std::size_t m = grid.size();
    std::vector<FiberVector> images(m);
    parallel_for(m, threads, [&](std::size_t i) { images[i] = e.u(spec->step(grid[i], 1)); });
    for (std::size_t i = 0; i < m; ++i) {
      const FiberVector base_part = spec->psi()(grid[i]) * e.u.values[i] + spec->rho()(grid[i]);
      e.residual_lambda = std::max(e.residual_lambda, (lambda * images[i] - base_part).norm());
      e.residual_one = std::max(e.residual_one, (images[i] - base_part).norm());
      e.image_sup = std::max(e.image_sup, images[i].norm());
    }
    if (oracle) {
      double sup = 0.0;
      CompensatedSum l1, l2;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = (e.u.values[i] - reference[i]).norm();
        sup = std::max(sup, d);
        l1 += d;
        l2 += d * d;
      }
      e.dist_sup = sup;
      e.dist_l1 = l1.value() / static_cast<double>(m);
      e.dist_l2 = std::sqrt(l2.value() / static_cast<double>(m));
    }
    out.entries.push_back(std::move(e));
  }
  if (oracle) {
    out.decreasing = true;
    for (std::size_t k = 1; k < out.entries.size(); ++k) {
      if (!(*out.entries[k].dist_sup < *out.entries[k - 1].dist_sup)) out.decreasing = false;
    }
  }
  return out;
}

}  // namespace cocycle_forge
