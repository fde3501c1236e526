#include <gtest/gtest.h>

#include "support.hpp"

namespace {

const std::vector<std::pair<std::int64_t, cplx>> kRho{{-2, {0.25, -0.1}}, {-1, {0.5, 0.2}}, {0, 0.3}, {1, 1.0}, {2, {-0.4, 0.35}}};

TEST(Solver, SeriesMatchesFourierClosedForm) {
  const double beta = 1.0;
  const auto spec = test::vortex(beta, kRho);
  for (double lambda : {0.5, 0.9, 0.99}) {
    for (double t : {0.0, 0.3, 0.71}) {
      const cplx got = cf::to_complex(cf::evaluate_u_lambda(spec, lambda, cf::BasePoint::circle(t), 1e-13));
      const cplx want = test::vortex_solution(kRho, spec.base().alpha(), beta, lambda, t);
      EXPECT_NEAR(std::abs(got - want), 0.0, 1e-12) << lambda << " " << t;
    }
  }
}

TEST(Solver, LambdaZeroIsSingleTerm) {
  // u_0(x) = -Psi(x)^{-1} rho(x).
  const auto spec = test::vortex(0.4, kRho);
  const auto x = cf::BasePoint::circle(0.6);
  const cf::FiberVector want = -(spec.psi()(x).inverse() * cf::FiberVector(spec.rho()(x)));
  EXPECT_LT((cf::evaluate_u_lambda(spec, 0.0, x, 1e-12) - want).norm(), 1e-15);
}

TEST(Solver, RejectsBadLambda) {
  const auto spec = test::vortex(1.0, kRho);
  const auto grid = cf::make_grid(spec.base(), 4);
  EXPECT_THROW(cf::solve_u_lambda(spec, 1.0, grid, 1e-10), cf::InvalidInput);
  EXPECT_THROW(cf::solve_u_lambda(spec, -0.1, grid, 1e-10), cf::InvalidInput);
  EXPECT_THROW(cf::solve_u_lambda(spec, std::nan(""), grid, 1e-10), cf::InvalidInput);
  EXPECT_THROW(cf::solve_u_lambda(spec, 0.5, grid, 0.0), cf::InvalidInput);
  const auto foreign = cf::make_grid(cf::BaseSystem::cyclic(3), 3);
  EXPECT_THROW(cf::solve_u_lambda(spec, 0.5, foreign, 1e-10), cf::InvalidInput);
}

TEST(Solver, SeriesAgreesWithBackwardRoute) {
  cf::AngleFunction a;
  a.winding = 1;
  a.amplitude = 0.5;
  const cf::CocycleSpec spec(cf::BaseSystem::circle(cf::kGoldenTurns), cf::OrthogonalField::diagonal_rotations(3, {a}),
                             cf::VectorField::constant(test::vec({1.0, 0.2, -0.5})));
  for (double lambda : {0.3, 0.9, 0.99}) {
    for (double t : {0.05, 0.5}) {
      const auto x = cf::BasePoint::circle(t);
      EXPECT_LT((cf::evaluate_u_lambda(spec, lambda, x, 1e-12) - cf::evaluate_u_lambda_backward(spec, lambda, x, 1e-12))
                    .norm(),
                1e-10);
    }
  }
}

TEST(Solver, ResidualAndSupBound) {
  const auto spec = std::make_shared<const cf::CocycleSpec>(test::vortex(1.0, kRho));
  const auto grid = cf::make_grid(spec->base(), 64);
  for (double lambda : {0.9, 0.99}) {
    const auto u = cf::solve_u_lambda(spec, lambda, grid, 1e-11);
    const auto r = cf::residual_report(*spec, lambda, u);
    EXPECT_LE(r.sup, 2e-11);
    EXPECT_LE(u.sup_norm, u.sup_bound);
    EXPECT_LE(r.image_sup, spec->rho_sup() / (1.0 - lambda) + 1e-10);
  }
}

TEST(Solver, ThreadsGiveIdenticalValues) {
  const auto spec = std::make_shared<const cf::CocycleSpec>(test::vortex(1.0, kRho));
  const auto grid = cf::make_grid(spec->base(), 32);
  const auto a = cf::solve_u_lambda(spec, 0.9, grid, 1e-10, 1);
  const auto b = cf::solve_u_lambda(spec, 0.9, grid, 1e-10, 4);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(a.values[i], b.values[i]);
}

TEST(Solver, SweepConvergesToExactSolution) {
  const double beta = 1.0;
  const std::vector<std::pair<std::int64_t, cplx>> rho{{1, 1.0}};
  const auto spec = std::make_shared<const cf::CocycleSpec>(test::vortex(beta, rho));
  const double alpha = spec->base().alpha();
  const std::vector<double> lambdas{0.9, 0.99, 0.999};
  const auto sw = cf::sweep(spec, lambdas, cf::make_grid(spec->base(), 32), 1e-12, [&](const cf::BasePoint& x) {
    return cf::from_complex(test::vortex_solution(rho, alpha, beta, 1.0, x.angle()));
  });
  EXPECT_TRUE(sw.decreasing);
  const cplx e = std::exp(cplx(0.0, 2.0 * test::kPi * alpha - beta));
  for (const auto& entry : sw.entries) {
    EXPECT_NEAR(*entry.dist_sup, std::abs(1.0 / (1.0 - entry.lambda * e) - 1.0 / (1.0 - e)), 1e-10);
    EXPECT_LE(entry.residual_lambda, 1e-11);
  }
  EXPECT_GT(sw.entries[0].residual_one, sw.entries[2].residual_one);
  EXPECT_THROW(cf::sweep(spec, std::vector<double>{0.9, 0.5}, cf::make_grid(spec->base(), 4), 1e-10),
               cf::InvalidInput);
}

TEST(Solver, UniqueBoundedSolution) {
  // The series solution is the unique bounded solution: the backward route started
  // from any value converges to it.
  const auto spec = test::vortex(2.0, kRho);
  const auto x = cf::BasePoint::circle(0.4);
  const double lambda = 0.9;
  const cf::FiberVector u = cf::evaluate_u_lambda(spec, lambda, x, 1e-14);
  const std::int64_t n = 400;
  cf::SkewState s{cf::step(spec.base(), x, n), test::vec({50.0, -30.0})};
  for (std::int64_t k = 0; k < n; ++k) s = cf::hyperbolized_step(spec, lambda, s, cf::Direction::backward);
  EXPECT_LT((s.v - u).norm(), 1e-12);
}

TEST(Solver, ScriptSZeroMeanOnExactSolution) {
  const double beta = 1.0;
  const std::vector<std::pair<std::int64_t, cplx>> rho{{1, 1.0}};
  const auto spec = test::vortex(beta, rho);
  const double alpha = spec.base().alpha();
  auto ustar = [&](const cf::BasePoint& x) { return cf::from_complex(test::vortex_solution(rho, alpha, beta, 1.0, x.angle())); };
  const double usup = 1.0 / std::abs(std::exp(cplx(0.0, 2.0 * test::kPi * alpha)) - std::exp(cplx(0.0, beta)));
  const std::vector<double> lambdas{0.9, 0.99, 0.999};
  const auto s = cf::zero_mean_test(spec, ustar, usup, lambdas, cf::make_grid(spec.base(), 8), 1e-13);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_GT(s[0], s[1]);
  EXPECT_GT(s[1], s[2]);
  EXPECT_THROW(cf::script_S(spec, 1.0, ustar, usup, cf::BasePoint::circle(0.0), 1e-10), cf::InvalidInput);
}

TEST(Solver, ScriptSFixesHomogeneousSolutions) {
  const double alpha = cf::kGoldenTurns;
  const cf::CocycleSpec spec(cf::BaseSystem::circle(alpha), cf::OrthogonalField::constant_rotation(2.0 * test::kPi * alpha),
                             cf::VectorField::zero(2));
  // v(x) = e^{2 pi i x} satisfies v(Tx) = Psi v(x).
  auto v = [](const cf::BasePoint& x) { return cf::from_complex(std::exp(cplx(0.0, 2.0 * test::kPi * x.angle()))); };
  for (double lambda : {0.5, 0.99}) {
    const auto x = cf::BasePoint::circle(0.21);
    EXPECT_LT((cf::script_S(spec, lambda, v, 1.0, x, 1e-14) - v(x)).norm(), 1e-11);
  }
}

TEST(Solver, ResidualSpecCases) {
  const double beta = 1.0;
  const std::vector<std::pair<std::int64_t, cplx>> rho{{1, 1.0}, {-1, {0.2, 0.1}}};
  const auto spec = test::vortex(beta, rho);
  const double alpha = spec.base().alpha();
  const auto grid = cf::make_grid(spec.base(), 64);
  const auto exact = cf::Section::sample(grid, [&](const cf::BasePoint& x) {
    return cf::from_complex(test::vortex_solution(rho, alpha, beta, 1.0, x.angle()));
  });
  EXPECT_LE(cf::residual(spec, 1.0, exact), 1e-10);
  const auto zero = cf::Section::sample(grid, [](const cf::BasePoint&) { return test::vec({0.0, 0.0}); });
  double rho_grid = 0.0;
  for (const auto& x : grid.points) rho_grid = std::max(rho_grid, spec.rho()(x).norm());
  EXPECT_DOUBLE_EQ(cf::residual(spec, 0.9, zero), rho_grid);
  const double eps = 1e-9;
  EXPECT_LE(cf::residual(spec, 0.95, cf::solve_u_lambda(spec, 0.95, grid, eps)), 2.0 * eps + 1e-10);
}

TEST(Solver, ScriptSIdentity) {
  // u_lambda = u* - S_lambda(u*) for an exact solution u*.
  const double beta = 1.0;
  const std::vector<std::pair<std::int64_t, cplx>> rho{{1, 1.0}};
  const auto spec = test::vortex(beta, rho);
  const double alpha = spec.base().alpha();
  auto ustar = [&](const cf::BasePoint& x) { return cf::from_complex(test::vortex_solution(rho, alpha, beta, 1.0, x.angle())); };
  const double usup = std::abs(test::vortex_solution(rho, alpha, beta, 1.0, 0.0));
  const double eps = 1e-12;
  const cplx d1 = std::exp(cplx(0.0, 2.0 * test::kPi * alpha)) - std::exp(cplx(0.0, beta));
  for (double lambda : {0.9, 0.99}) {
    const cplx dl = lambda * std::exp(cplx(0.0, 2.0 * test::kPi * alpha)) - std::exp(cplx(0.0, beta));
    for (double t : {0.0, 0.3}) {
      const auto x = cf::BasePoint::circle(t);
      const cf::FiberVector s = cf::script_S(spec, lambda, ustar, usup, x, eps);
      EXPECT_LT((cf::evaluate_u_lambda(spec, lambda, x, eps) - (ustar(x) - s)).norm(), 2.0 * eps + 1e-13);
      EXPECT_NEAR(s.norm(), std::abs(1.0 / d1 - 1.0 / dl), 1e-12);
    }
  }
  // Psi = Id, f = c: S_lambda(c) = c.
  const cf::CocycleSpec flat(cf::BaseSystem::circle(0.3), cf::OrthogonalField::identity(2), cf::VectorField::zero(2));
  const auto c = cf::VectorField::constant(test::vec({0.5, 2.0}));
  EXPECT_LT((cf::script_S(flat, 0.9, c, c.sup_bound(), cf::BasePoint::circle(0.0), 1e-14) - test::vec({0.5, 2.0})).norm(),
            1e-14);
}

TEST(Solver, UntwistedCoboundaryOnCycle) {
  // Psi = Id on a cycle of length 8, rho = u* o T - u* with u* of mean zero: u_lambda
  // converges to u* and S_lambda(u*) vanishes in the limit.
  const std::int64_t p = 8;
  std::mt19937_64 rng(8);
  std::vector<cf::FiberVector> u(p);
  double mean = 0.0;
  for (auto& v : u) {
    v = test::gaussian(rng, 1);
    mean += v[0];
  }
  for (auto& v : u) v[0] -= mean / static_cast<double>(p);
  std::vector<cf::FiberVector> rho(p);
  for (std::int64_t i = 0; i < p; ++i) rho[i] = u[(i + 1) % p] - u[i];
  const auto spec = std::make_shared<const cf::CocycleSpec>(cf::BaseSystem::cyclic(p), cf::OrthogonalField::identity(1),
                                                            cf::VectorField::table(rho));
  const auto field = cf::VectorField::table(u);
  const std::vector<double> lambdas{0.9, 0.99, 0.999};
  const auto sw = cf::sweep(spec, lambdas, cf::make_grid(spec->base(), p), 1e-13,
                            [&](const cf::BasePoint& x) { return u[static_cast<std::size_t>(x.index())]; });
  EXPECT_TRUE(sw.decreasing);
  EXPECT_LT(*sw.entries.back().dist_sup, 1e-2);
  const auto s = cf::zero_mean_test(*spec, field, field.sup_bound(), lambdas, cf::make_grid(spec->base(), p), 1e-13);
  EXPECT_GT(s[0], s[2]);
  const auto o = cf::cyclic_solve(*spec, 1.0);
  for (std::int64_t i = 0; i < p; ++i) EXPECT_NEAR(o.solution[i][0], u[i][0], 1e-12);
}

}  // namespace
