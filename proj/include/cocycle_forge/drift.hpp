#pragma once

// Displacement Disp(v, I) = sup_x |v(Tx) - I(x) v(x)|, maximal drift estimates
// D_n = (1/n) sup_x |I(n, x) v0 - v0|, and the zero-drift => vanishing displacement
// pipeline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cocycle_forge/averaging.hpp"
#include "cocycle_forge/cocycle.hpp"
#include "cocycle_forge/hyperbolized_solver.hpp"
#include "cocycle_forge/parallel.hpp"

namespace cocycle_forge {

/// sup over `grid` of |v(Tx) - Psi(x) v(x) - rho(x)|.
template <Observable V>
double displacement(const CocycleSpec& spec, const V& v, const SampleGrid& grid, unsigned threads = 1) {
  std::vector<double> d(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    const BasePoint& x = grid[i];
    d[i] = (FiberVector(v(spec.step(x, 1))) - spec.psi()(x) * FiberVector(v(x)) - spec.rho()(x)).norm();
  });
  return d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
}

/// Uses the stored values of `v` for v(x).
inline double displacement(const CocycleSpec& spec, const Section& v, unsigned threads = 1) {
  return residual(spec, 1.0, v, threads);
}

struct DisplacementCurve {
  std::vector<double> lambda;
  std::vector<double> displacement;
  /// (1 - lambda) sup_grid |u_lambda(Tx)|.
  std::vector<double> bound;
  /// max_k |displacement_k - bound_k|.
  double identity_gap = 0.0;
  bool strictly_decreasing = true;
};

inline DisplacementCurve displacement_curve(std::shared_ptr<const CocycleSpec> spec, std::span<const double> lambdas,
                                            const SampleGrid& grid, double eps, unsigned threads = 1) {
  const LambdaSweep sw = sweep(spec, lambdas, grid, eps, {}, threads);
  DisplacementCurve c;
  for (const auto& e : sw.entries) {
    c.lambda.push_back(e.lambda);
    c.displacement.push_back(e.residual_one);
    c.bound.push_back((1.0 - e.lambda) * e.image_sup);
    c.identity_gap = std::max(c.identity_gap, std::abs(c.displacement.back() - c.bound.back()));
  }
  for (std::size_t k = 1; k < c.displacement.size(); ++k) {
    if (!(c.displacement[k] < c.displacement[k - 1])) c.strictly_decreasing = false;
  }
  return c;
}

inline const std::vector<std::int64_t>& default_n_schedule() {
  static const std::vector<std::int64_t> s{100, 1000, 10000, 100000};
  return s;
}

struct DriftEstimate {
  std::vector<std::int64_t> n;
  std::vector<double> d;
  /// Least-squares fit D_n ~ intercept + c_fit / n.
  double c_fit = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  /// max_n n D_n.
  double max_n_times_d = 0.0;
  /// Slope of log D_n against log n (NaN when some D_n vanishes).
  double decay_exponent = std::numeric_limits<double>::quiet_NaN();
  bool zero_drift = false;
};

namespace detail {

inline void check_n_schedule(std::span<const std::int64_t> ns) {
  if (ns.empty()) throw InvalidInput("empty n schedule");
  for (std::size_t k = 0; k < ns.size(); ++k) {
    if (ns[k] < 1) throw InvalidInput("n schedule entries must be >= 1");
    if (k > 0 && ns[k] <= ns[k - 1]) throw InvalidInput("n schedule must be increasing");
  }
}

// |I(n, x) v0 - v0| = |v0 - P_{n-1} v0 + sum_{j<n} P_j rho(T^j x)| with
// P_j = Psi(x)^{-1} ... Psi(T^j x)^{-1}; the sum is compensated.
inline std::vector<double> drift_norms(const CocycleSpec& spec, const BasePoint& x, std::span<const std::int64_t> ns,
                                       const FiberVector& v0) {
  std::vector<double> out;
  out.reserve(ns.size());
  const InverseField inv(spec.psi());
  OrthogonalProduct prod(spec.dim(), spec.psi().planar());
  VectorSum sum(spec.dim());
  const bool zero_start = v0.isZero(0.0);
  std::size_t next = 0;
  for (std::int64_t j = 0; j < ns.back(); ++j) {
    const BasePoint y = spec.step(x, j);
    prod.right_multiply(inv, y);
    sum.add(prod.apply(FiberVector(spec.rho()(y))));
    if (j + 1 == ns[next]) {
      FiberVector w = sum.value();
      if (!zero_start) w += v0 - prod.apply(v0);
      out.push_back(w.norm());
      ++next;
    }
  }
  return out;
}

}  // namespace detail

/// Classifies D_n data: zero drift when every D_n <= 1e-14, or when D_n ~ a + C/n
/// explains at least 99% of the variance and D_{n_max} < 1e-2 sup|rho|.
inline void classify_drift(DriftEstimate& e, double rho_sup) {
  const std::size_t m = e.n.size();
  e.max_n_times_d = 0.0;
  for (std::size_t k = 0; k < m; ++k) e.max_n_times_d = std::max(e.max_n_times_d, static_cast<double>(e.n[k]) * e.d[k]);
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    mx += 1.0 / static_cast<double>(e.n[k]);
    my += e.d[k];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double dx = 1.0 / static_cast<double>(e.n[k]) - mx;
    const double dy = e.d[k] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  e.c_fit = sxx > 0.0 ? sxy / sxx : 0.0;
  e.intercept = my - e.c_fit * mx;
  e.r_squared = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 0.0;

  bool positive = m >= 2;
  for (const double v : e.d) positive = positive && v > 0.0;
  if (positive) {
    double lx = 0.0, ly = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      lx += std::log(static_cast<double>(e.n[k]));
      ly += std::log(e.d[k]);
    }
    lx /= static_cast<double>(m);
    ly /= static_cast<double>(m);
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double dx = std::log(static_cast<double>(e.n[k])) - lx;
      a += dx * (std::log(e.d[k]) - ly);
      b += dx * dx;
    }
    e.decay_exponent = a / b;
  } else {
    e.decay_exponent = std::numeric_limits<double>::quiet_NaN();
  }

  const bool trivially_zero = std::all_of(e.d.begin(), e.d.end(), [](double v) { return v <= 1e-14; });
  e.zero_drift = trivially_zero || (e.r_squared >= 0.99 && e.d.back() < 1e-2 * rho_sup);
}

/// D_n = (1/n) sup_grid |I(n, x) v0 - v0| along an increasing n schedule.
inline DriftEstimate drift_estimate(const CocycleSpec& spec, const SampleGrid& grid, std::span<const std::int64_t> ns,
                                    std::optional<FiberVector> v0 = std::nullopt, unsigned threads = 1) {
  detail::check_n_schedule(ns);
  if (grid.size() == 0) throw InvalidInput("empty grid");
  const FiberVector start = v0 ? *v0 : FiberVector::Zero(spec.dim());
  if (start.size() != spec.dim()) throw DimensionMismatch("drift v0", spec.dim(), static_cast<int>(start.size()));
  std::vector<std::vector<double>> per_point(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) { per_point[i] = detail::drift_norms(spec, grid[i], ns, start); });
  DriftEstimate e;
  e.n.assign(ns.begin(), ns.end());
  for (std::size_t k = 0; k < ns.size(); ++k) {
    double sup = 0.0;
    for (const auto& p : per_point) sup = std::max(sup, p[k]);
    e.d.push_back(sup / static_cast<double>(ns[k]));
  }
  classify_drift(e, spec.rho_sup());
  return e;
}

/// The twisted sequence z_j(x) = Psi(x)^{-1} ... Psi(T^j x)^{-1} rho(T^j x) whose
/// Cesaro means control the drift.
inline auto drift_sequence(const CocycleSpec& spec) {
  const OrthogonalField* psi = &spec.psi();
  const VectorField* rho = &spec.rho();
  auto obs = [psi, rho](const BasePoint& y) -> FiberVector { return (*psi)(y).inverse() * FiberVector((*rho)(y)); };
  return TwistedSequence(spec.base(), InverseField(spec.psi()), obs, spec.rho_sup());
}

/// sup_grid |(1/N) sum_{j<N} Psi(x)^{-1} ... Psi(T^j x)^{-1} rho(T^j x)|.
inline double zero_drift_diagnostic(const CocycleSpec& spec, const SampleGrid& grid, std::int64_t N,
                                    unsigned threads = 1) {
  if (N < 1) throw InvalidInput("zero drift diagnostic needs N >= 1");
  const auto seq = drift_sequence(spec);
  std::vector<double> vals(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) { vals[i] = cesaro_twisted(seq, grid[i], N).norm(); });
  return vals.empty() ? 0.0 : *std::max_element(vals.begin(), vals.end());
}

/// A candidate almost-invariant section supplied to the pipeline.
struct CandidateSection {
  std::string name;
  SectionFn v;
};

struct CandidateCheck {
  std::string name;
  double displacement = 0.0;
  double sup = 0.0;
  /// Smallest n with D_n > Disp(v) + 2 (sup|v| + |v0|) / n + tol, if any.
  std::optional<std::int64_t> contradiction_at;
};

struct TheoremBReport {
  DriftEstimate drift;
  DisplacementCurve curve;
  AveragingReport averaging;
  std::vector<CandidateCheck> candidates;
  std::vector<std::string> anomalies;
};

struct TheoremBOptions {
  double eps = 1e-10;
  /// Schedule for the Abel/Cesaro comparison at the first grid point.
  std::vector<std::int64_t> averaging_schedule{100, 1000, 10000};
  std::vector<CandidateSection> candidates;
  double candidate_tolerance = 1e-9;
  unsigned threads = 1;
};

/// Drift estimate, displacement curve of u_lambda and Abel/Cesaro comparison of the
/// drift sequence. Inconsistencies are returned as anomalies rather than thrown.
inline TheoremBReport theorem_B_pipeline(std::shared_ptr<const CocycleSpec> spec, const SampleGrid& grid,
                                         std::span<const double> lambdas, std::span<const std::int64_t> ns,
                                         const TheoremBOptions& opt = {}) {
  TheoremBReport r;
  r.drift = drift_estimate(*spec, grid, ns, std::nullopt, opt.threads);
  r.curve = displacement_curve(spec, lambdas, grid, opt.eps, opt.threads);
  const auto seq = drift_sequence(*spec);
  r.averaging = frobenius_compare(seq, grid[0], opt.averaging_schedule);

  if (r.drift.zero_drift && !r.curve.strictly_decreasing) {
    r.anomalies.push_back("zero drift classified but displacement of u_lambda is not decreasing");
  }
  if (r.curve.identity_gap > 2.0 * opt.eps + 1e-10) {
    r.anomalies.push_back("displacement differs from (1 - lambda) sup|u_lambda(Tx)| by " +
                          std::to_string(r.curve.identity_gap));
  }
  // |I(n, x) 0| <= |v(x)| + n Disp(v) + |v(T^n x)| for every section v, so D_n can
  // never exceed Disp(v) + 2 sup|v| / n.
  for (const auto& c : opt.candidates) {
    CandidateCheck chk;
    chk.name = c.name;
    chk.displacement = displacement(*spec, c.v, grid, opt.threads);
    for (const auto& x : grid.points) chk.sup = std::max(chk.sup, c.v(x).norm());
    for (std::size_t k = 0; k < r.drift.n.size(); ++k) {
      const double n = static_cast<double>(r.drift.n[k]);
      if (r.drift.d[k] > chk.displacement + 2.0 * chk.sup / n + opt.candidate_tolerance) {
        chk.contradiction_at = r.drift.n[k];
        r.anomalies.push_back("section '" + c.name + "' has displacement " + std::to_string(chk.displacement) +
                              " incompatible with D_" + std::to_string(r.drift.n[k]) + " = " +
                              std::to_string(r.drift.d[k]));
        break;
      }
    }
    r.candidates.push_back(std::move(chk));
  }
  return r;
}

}  // namespace cocycle_forge
