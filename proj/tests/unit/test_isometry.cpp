#include <gtest/gtest.h>

#include "support.hpp"

namespace {

TEST(OrthogonalMap, RejectsNonOrthogonal) {
  cf::FiberMatrix m(2, 2);
  m << 1.0, 0.1, 0.0, 1.0;
  EXPECT_THROW(cf::OrthogonalMap{m}, cf::InvalidInput);
  cf::FiberMatrix r(2, 3);
  r.setZero();
  EXPECT_THROW(cf::OrthogonalMap{r}, cf::InvalidInput);
  volatile int too_big = cf::kMaxFiberDim + 1;
  EXPECT_THROW(cf::OrthogonalMap::identity(too_big), cf::InvalidInput);
  EXPECT_THROW(cf::OrthogonalMap::identity(0), cf::InvalidInput);
}

TEST(OrthogonalMap, NoisyInputIsReorthonormalized) {
  std::mt19937_64 rng(3);
  for (int l = 1; l <= 8; ++l) {
    cf::FiberMatrix m = test::haar(rng, l);
    m(0, 0) += 1e-9;
    const cf::OrthogonalMap q(m);
    EXPECT_LT(q.orthogonality_defect(), 1e-15) << l;
    EXPECT_LT((q.matrix() - m).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(OrthogonalMap, RotationAndComplexAgree) {
  const auto r = cf::OrthogonalMap::rotation(0.7);
  ASSERT_TRUE(r.as_complex().has_value());
  EXPECT_NEAR(std::abs(*r.as_complex() - std::polar(1.0, 0.7)), 0.0, 1e-15);
  const cf::FiberVector v = test::vec({0.3, -1.2});
  EXPECT_NEAR(std::abs(cf::to_complex(r * v) - std::polar(1.0, 0.7) * cplx(0.3, -1.2)), 0.0, 1e-15);
  // A reflection is not a complex rotation.
  cf::FiberMatrix f(2, 2);
  f << 1.0, 0.0, 0.0, -1.0;
  EXPECT_FALSE(cf::OrthogonalMap(f).as_complex().has_value());
  EXPECT_THROW(cf::OrthogonalMap::from_complex({2.0, 0.0}), cf::InvalidInput);
}

TEST(OrthogonalMap, PlanarBlocksLayout) {
  const std::vector<double> angles{0.5};
  const auto m = cf::OrthogonalMap::planar_blocks(angles, 3);
  EXPECT_DOUBLE_EQ(m.matrix()(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(m.matrix()(1, 0), std::sin(0.5));
  const std::vector<double> too_many{0.1, 0.2};
  EXPECT_THROW(cf::OrthogonalMap::planar_blocks(too_many, 3), cf::InvalidInput);
}

TEST(EuclideanIsometry, PreservesDistances) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int l = 1 + trial % 8;
    const cf::EuclideanIsometry g(cf::OrthogonalMap(test::haar(rng, l)), test::gaussian(rng, l));
    const cf::FiberVector a = test::gaussian(rng, l);
    const cf::FiberVector b = test::gaussian(rng, l);
    EXPECT_NEAR((g(a) - g(b)).norm(), (a - b).norm(), 1e-13);
  }
}

TEST(EuclideanIsometry, CompositionIsAssociativeAndInverts) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const int l = 1 + trial % 5;
    auto draw = [&] { return cf::EuclideanIsometry(cf::OrthogonalMap(test::haar(rng, l)), test::gaussian(rng, l)); };
    const auto a = draw(), b = draw(), c = draw();
    const auto left = cf::compose(cf::compose(a, b), c);
    const auto right = cf::compose(a, cf::compose(b, c));
    EXPECT_LT(cf::distance(left, right), 1e-13);
    const cf::FiberVector v = test::gaussian(rng, l);
    // compose(a, b) applies b first.
    EXPECT_LT((cf::compose(a, b)(v) - a(b(v))).norm(), 1e-13);
    EXPECT_LT((cf::inverse(a)(a(v)) - v).norm(), 1e-13);
    EXPECT_LT(cf::distance(cf::compose(a, cf::inverse(a)), cf::EuclideanIsometry::identity(l)), 1e-13);
  }
}

TEST(EuclideanIsometry, DimensionMismatchThrows) {
  EXPECT_THROW(cf::EuclideanIsometry(cf::OrthogonalMap::identity(2), test::vec({1.0, 2.0, 3.0})),
               cf::DimensionMismatch);
  const auto g = cf::EuclideanIsometry::identity(2);
  EXPECT_THROW(cf::apply(g, test::vec({1.0})), cf::DimensionMismatch);
}

TEST(PlanarIsometry, MatchesMatrixForm) {
  const cf::EuclideanIsometry g(cf::OrthogonalMap::rotation(1.1), test::vec({0.4, -0.2}));
  const auto p = cf::PlanarIsometry::from(g);
  ASSERT_TRUE(p.has_value());
  const cplx z(0.9, 0.25);
  EXPECT_NEAR(std::abs((*p)(z) - cf::to_complex(g(cf::from_complex(z)))), 0.0, 1e-15);
  const auto q = cf::compose(*p, cf::inverse(*p));
  EXPECT_NEAR(std::abs(q(z) - z), 0.0, 1e-15);
}

TEST(CompensatedSum, RecoversCancellation) {
  cf::CompensatedSum s;
  s += 1.0;
  for (int i = 0; i < 1000000; ++i) s += 1e-16;
  s += -1.0;
  // The naive sum loses every increment.
  EXPECT_NEAR(s.value(), 1e-10, 1e-19);
}

TEST(CompensatedVectorSum, WeightedAccumulation) {
  cf::CompensatedVectorSum<cf::FiberVector> s(2);
  for (int i = 0; i < 1000; ++i) s.add_scaled(0.1, test::vec({1.0, -2.0}));
  EXPECT_NEAR(s.value()[0], 100.0, 1e-12);
  EXPECT_NEAR(s.value()[1], -200.0, 1e-12);
}

TEST(OrthogonalProduct, LongProductStaysOrthogonal) {
  std::mt19937_64 rng(5);
  const cf::FiberMatrix a = test::haar(rng, 3);
  cf::OrthogonalProduct p(3, false);
  for (int i = 0; i < 100000; ++i) p.right_multiply(a);
  EXPECT_LT(p.value().orthogonality_defect(), 1e-13);

  cf::OrthogonalProduct z(2, true);
  const cplx w = std::polar(1.0, 0.3);
  for (int i = 0; i < 100000; ++i) z.right_multiply(w);
  // Renormalized every 1024 factors, so the modulus drifts by at most ~1024 ulps.
  EXPECT_NEAR(std::abs(z.complex_value()), 1.0, 5e-13);
  EXPECT_NEAR(std::arg(z.complex_value()), std::remainder(30000.0, 2.0 * test::kPi), 1e-9);
}

TEST(EuclideanIsometry, SmallCases) {
  const cf::EuclideanIsometry g(cf::OrthogonalMap::rotation(test::kPi / 2.0), test::vec({1.0, 0.0}));
  const auto gg = cf::compose(g, g);
  EXPECT_LT((gg.linear_part().matrix() - cf::OrthogonalMap::rotation(test::kPi).matrix()).norm(), 1e-15);
  EXPECT_LT((gg.translation_part() - test::vec({1.0, 1.0})).norm(), 1e-15);
  EXPECT_LT(cf::distance(cf::compose(cf::EuclideanIsometry::identity(2), g), g), 1e-15);

  const auto t = cf::EuclideanIsometry::translation(test::vec({3.0, 4.0}));
  EXPECT_LT((cf::inverse(t).translation_part() - test::vec({-3.0, -4.0})).norm(), 1e-15);
  EXPECT_LT((t(test::vec({0.0, 0.0})) - test::vec({3.0, 4.0})).norm(), 1e-15);
  const auto r = cf::EuclideanIsometry(cf::OrthogonalMap::rotation(0.4), test::vec({0.0, 0.0}));
  EXPECT_LT((cf::inverse(r).linear_part().matrix() - cf::OrthogonalMap::rotation(-0.4).matrix()).norm(), 1e-15);
  EXPECT_LT((r(test::vec({1.0, 0.0})) - test::vec({std::cos(0.4), std::sin(0.4)})).norm(), 1e-15);
  EXPECT_LT(cf::distance(cf::inverse(cf::EuclideanIsometry::identity(3)), cf::EuclideanIsometry::identity(3)), 1e-15);
}

}  // namespace
