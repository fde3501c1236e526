#include <gtest/gtest.h>

#include "support.hpp"

namespace {

auto scalar_sequence(double (*z)(std::int64_t), double sup = 1.0) {
  auto fn = [z](std::int64_t j) {
    cf::FiberVector v(1);
    v[0] = z(j);
    return v;
  };
  return cf::IndexedSequence(1, fn, sup);
}

double alternating(std::int64_t j) { return j % 2 == 0 ? 1.0 : -1.0; }
double cosine(std::int64_t j) { return std::cos(static_cast<double>(j)); }
double constant(std::int64_t) { return -0.4; }

const cf::BasePoint kOrigin = cf::BasePoint::circle(0.0);

TEST(Truncation, TailBound) {
  for (double lambda : {0.0, 0.5, 0.9, 0.999}) {
    for (double eps : {1e-6, 1e-12}) {
      const auto n = cf::series_truncation(lambda, 3.0, eps);
      EXPECT_LE(std::pow(lambda, static_cast<double>(n)) * 3.0 / (1.0 - lambda), eps * (1.0 + 1e-12));
      if (n > 1) {
        EXPECT_GT(std::pow(lambda, static_cast<double>(n - 2)) * 3.0 / (1.0 - lambda), eps);
      }
    }
  }
  EXPECT_EQ(cf::series_truncation(0.9, 0.0, 1e-10), 1);
  EXPECT_THROW(cf::series_truncation(0.9, 1.0, 0.0), cf::InvalidInput);
  EXPECT_THROW(cf::series_truncation(1.0 - 1e-15, 1.0, 1e-14), cf::InvalidInput);
}

TEST(Averaging, AbelMassOne) {
  // Constants are reproduced exactly by the renormalized weights.
  const auto seq = scalar_sequence(constant, 0.4);
  for (double lambda : {0.0, 0.3, 0.99, 0.9999}) {
    EXPECT_NEAR(cf::abel_twisted(seq, kOrigin, lambda, 1e-14)[0], -0.4, 1e-15);
  }
  EXPECT_NEAR(cf::cesaro_twisted(seq, kOrigin, 1000)[0], -0.4, 1e-15);
}

TEST(Averaging, ClosedFormAbelMeans) {
  // (1 - l) sum l^j (-1)^j = (1 - l)/(1 + l); (1 - l) Re 1/(1 - l e^i) for cos j.
  for (double lambda : {0.5, 0.9, 0.99}) {
    EXPECT_NEAR(cf::abel_twisted(scalar_sequence(alternating), kOrigin, lambda, 1e-15)[0],
                (1.0 - lambda) / (1.0 + lambda), 1e-14);
    const double c = (1.0 - lambda) * std::real(1.0 / (1.0 - lambda * std::exp(cplx(0.0, 1.0))));
    EXPECT_NEAR(cf::abel_twisted(scalar_sequence(cosine), kOrigin, lambda, 1e-15)[0], c, 1e-13);
  }
  EXPECT_THROW(cf::abel_twisted(scalar_sequence(cosine), kOrigin, 1.0, 1e-12), cf::InvalidInput);
  EXPECT_THROW(cf::cesaro_twisted(scalar_sequence(cosine), kOrigin, 0), cf::InvalidInput);
}

TEST(Averaging, FrobeniusTransfer) {
  const std::vector<std::int64_t> schedule{100, 1000, 10000};
  for (auto z : {alternating, cosine, constant}) {
    const auto r = cf::frobenius_compare(scalar_sequence(z), kOrigin, schedule);
    EXPECT_TRUE(r.tracks);
    EXPECT_TRUE(r.bounded);
    ASSERT_EQ(r.discrepancy.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_LE(r.discrepancy[k], r.tolerance[k]);
  }
  EXPECT_THROW(cf::frobenius_compare(scalar_sequence(cosine), kOrigin, std::vector<std::int64_t>{}),
               cf::InvalidInput);
  EXPECT_THROW(cf::frobenius_compare(scalar_sequence(cosine), kOrigin, std::vector<std::int64_t>{100, 50}),
               cf::InvalidInput);
}

TEST(Averaging, TauberianProbeFlagsUnbounded) {
  // z_j = (-1)^j j is Abel summable but unbounded, so Cesaro need not follow.
  auto fn = [](std::int64_t j) {
    cf::FiberVector v(1);
    v[0] = (j % 2 == 0 ? 1.0 : -1.0) * static_cast<double>(j);
    return v;
  };
  const cf::IndexedSequence seq(1, fn);
  const auto r = cf::tauberian_probe(seq, kOrigin, std::vector<std::int64_t>{100, 1000});
  EXPECT_FALSE(r.bounded);
  EXPECT_FALSE(r.tracks);
}

TEST(Averaging, TwistPrefactorInvariance) {
  // A constant twist that is a rotation R gives z_j = R^j f(T^j x); the Cesaro mean
  // of the twisted sequence started at x equals the direct sum computed here.
  const double beta = 0.7;
  const auto sys = cf::BaseSystem::circle(cf::kGoldenTurns);
  const auto f = cf::VectorField::fourier_circle({{2, {0.5, -0.25}}});
  const cf::TwistedSequence seq(sys, cf::OrthogonalField::constant_rotation(beta), f, f.sup_bound());
  const auto x = cf::BasePoint::circle(0.33);
  cplx direct = 0.0;
  const std::int64_t N = 500;
  for (std::int64_t j = 0; j < N; ++j) {
    direct += std::polar(1.0, beta * static_cast<double>(j)) * cf::to_complex(f(cf::step(sys, x, j)));
  }
  direct /= static_cast<double>(N);
  EXPECT_NEAR(std::abs(cf::to_complex(cf::cesaro_twisted(seq, x, N)) - direct), 0.0, 1e-13);
}

TEST(Averaging, TwistedDecayBound) {
  const double beta = 1.0;
  const auto sys = cf::BaseSystem::circle(cf::kGoldenTurns);
  const auto f = cf::VectorField::fourier_circle({{1, 1.0}});
  const cf::TwistedSequence seq(sys, cf::OrthogonalField::constant_rotation(beta), f, 1.0);
  const double gamma = beta + 2.0 * test::kPi * cf::kGoldenTurns;
  for (std::int64_t N : {100, 1000}) {
    const double bound = 2.0 / (static_cast<double>(N) * std::abs(1.0 - std::exp(cplx(0.0, gamma))));
    for (const auto& x : cf::make_grid(sys, 16).points) EXPECT_LE(cf::cesaro_twisted(seq, x, N).norm(), bound + 1e-12);
  }
}

TEST(Averaging, ExpAverageOfMeanZeroObservable) {
  // (1 - l) sum l^j e^{2 pi i (x + j alpha)} = (1 - l) e^{2 pi i x} / (1 - l e^{2 pi i alpha}).
  const auto sys = cf::BaseSystem::circle(cf::kGoldenTurns);
  const auto f = cf::VectorField::fourier_circle({{1, 1.0}});
  const double lambda = 0.95;
  const auto x = cf::BasePoint::circle(0.2);
  const cplx expect = (1.0 - lambda) * std::exp(cplx(0.0, 2.0 * test::kPi * 0.2)) /
                      (1.0 - lambda * std::exp(cplx(0.0, 2.0 * test::kPi * cf::kGoldenTurns)));
  EXPECT_NEAR(std::abs(cf::to_complex(cf::exp_average(sys, f, 1.0, x, lambda, 1e-15)) - expect), 0.0, 1e-13);
}

TEST(Averaging, VonNeumannResidualShrinks) {
  const auto sys = cf::BaseSystem::circle(cf::kGoldenTurns);
  const auto f = cf::VectorField::fourier_circle({{1, 1.0}});
  const cf::TwistedSequence seq(sys, cf::OrthogonalField::constant_rotation(1.0), f, 1.0);
  const auto grid = cf::make_grid(sys, 16);
  EXPECT_LT(cf::von_neumann_residual(seq, grid, 1000), cf::von_neumann_residual(seq, grid, 10) + 1e-15);
  EXPECT_THROW(cf::von_neumann_residual(seq, grid, 0), cf::InvalidInput);
}

TEST(Averaging, SpecCases) {
  const auto sys = cf::BaseSystem::circle(cf::kGoldenTurns);
  const auto c = cf::VectorField::constant(test::vec({0.3, -0.2}));
  const cf::TwistedSequence flat(sys, cf::IdentityTwist{2}, c, c.sup_bound());
  const auto x = cf::BasePoint::circle(0.4);
  for (std::int64_t N : {1, 7, 1000}) EXPECT_LT((cf::cesaro_twisted(flat, x, N) - test::vec({0.3, -0.2})).norm(), 1e-15);
  for (double lambda : {0.1, 0.99}) {
    EXPECT_LT((cf::abel_twisted(flat, x, lambda, 1e-14) - test::vec({0.3, -0.2})).norm(), 1e-15);
    EXPECT_LT((cf::exp_average(sys, c, c.sup_bound(), x, lambda, 1e-14) - test::vec({0.3, -0.2})).norm(), 1e-15);
  }

  // Untwisted Weyl sum of e^{2 pi i theta}.
  const auto e1 = cf::VectorField::fourier_circle({{1, 1.0}});
  const cf::TwistedSequence weyl(sys, cf::IdentityTwist{2}, e1, 1.0);
  const double bound = 2.0 / (1e4 * std::abs(1.0 - std::exp(cplx(0.0, 2.0 * test::kPi * cf::kGoldenTurns))));
  EXPECT_LE(cf::cesaro_twisted(weyl, x, 10000).norm(), bound + 1e-15);

  // Twist rot(pi) with f = 1 produces (-1)^j.
  const auto one = cf::VectorField::constant(test::vec({1.0, 0.0}));
  const cf::TwistedSequence alt(sys, cf::OrthogonalField::constant_rotation(test::kPi), one, 1.0);
  for (double lambda : {0.5, 0.9, 0.999}) {
    EXPECT_NEAR(cf::abel_twisted(alt, x, lambda, 1e-14)[0], (1.0 - lambda) / (1.0 + lambda), 1e-13);
  }

  // A one-point base is a fixed point: every average returns f(x).
  const auto point = cf::BaseSystem::cyclic(1);
  const auto tab = cf::VectorField::table({test::vec({2.0, 5.0})});
  EXPECT_LT((cf::exp_average(point, tab, tab.sup_bound(), cf::BasePoint::cyclic(0, 1), 0.9, 1e-14) - test::vec({2.0, 5.0}))
                .norm(),
            1e-14);
}

TEST(Averaging, AlternatingDiscrepancyBound) {
  const std::vector<std::int64_t> schedule{100, 1000, 10000};
  const auto r = cf::frobenius_compare(scalar_sequence(alternating), kOrigin, schedule);
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const double N = static_cast<double>(schedule[k]);
    EXPECT_LE(r.discrepancy[k], 2.0 / N + (1.0 - r.lambda[k]) + 1e-15);
  }
  const auto z = cf::frobenius_compare(scalar_sequence(constant, 0.4), kOrigin, schedule);
  for (double d : z.discrepancy) EXPECT_LT(d, 1e-15);
}

TEST(Averaging, ZeroObservableHasZeroResidual) {
  const auto sys = cf::BaseSystem::circle(cf::kGoldenTurns);
  const auto zero = cf::VectorField::zero(2);
  const cf::TwistedSequence seq(sys, cf::OrthogonalField::constant_rotation(1.0), zero, 0.0);
  EXPECT_EQ(cf::von_neumann_residual(seq, cf::make_grid(sys, 4), 100), 0.0);
}

}  // namespace
