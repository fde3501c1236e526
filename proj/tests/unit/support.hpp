#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "cocycle_forge/cocycle_forge.hpp"

namespace cf = cocycle_forge;
using cplx = std::complex<double>;

namespace test {

inline constexpr double kPi = 3.14159265358979323846;

inline cf::FiberVector vec(std::initializer_list<double> xs) {
  cf::FiberVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline cf::FiberVector gaussian(std::mt19937_64& rng, int l) {
  std::normal_distribution<double> g(0.0, 1.0);
  cf::FiberVector v(l);
  for (int i = 0; i < l; ++i) v[i] = g(rng);
  return v;
}

// Haar orthogonal matrix via Gram-Schmidt on a Gaussian matrix (independent of the
// library's QR-based sampler).
inline cf::FiberMatrix haar(std::mt19937_64& rng, int l) {
  std::normal_distribution<double> g(0.0, 1.0);
  cf::FiberMatrix m(l, l);
  for (int j = 0; j < l; ++j) {
    cf::FiberVector c(l);
    for (int i = 0; i < l; ++i) c[i] = g(rng);
    for (int k = 0; k < j; ++k) c -= m.col(k).dot(c) * m.col(k);
    m.col(j) = c / c.norm();
  }
  return m;
}

// Exact solution of lambda u(theta + alpha) - e^{i beta} u(theta) = sum_k c_k e^{2 pi i k theta}.
inline cplx vortex_solution(const std::vector<std::pair<std::int64_t, cplx>>& rho, double alpha, double beta,
                            double lambda, double theta) {
  cplx s = 0.0;
  for (const auto& [k, c] : rho) {
    const cplx d = lambda * std::exp(cplx(0.0, 2.0 * kPi * static_cast<double>(k) * alpha)) - std::exp(cplx(0.0, beta));
    s += c / d * std::exp(cplx(0.0, 2.0 * kPi * std::fmod(static_cast<double>(k) * theta, 1.0)));
  }
  return s;
}

inline cf::CocycleSpec vortex(double beta, std::vector<std::pair<std::int64_t, cplx>> rho,
                              double alpha = cf::kGoldenTurns) {
  return {cf::BaseSystem::circle(alpha), cf::OrthogonalField::constant_rotation(beta),
          cf::VectorField::fourier_circle(rho)};
}

}  // namespace test
