#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "egt/divergence.hpp"
#include "egt/error.hpp"
#include "support.hpp"

using namespace egt;

namespace {

const GridSpec kTwo{0.0, 1.0, 2};

double sum_abs_diff(const GriddedDensity& p, const GriddedDensity& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return s;
}

}  // namespace

TEST(ExtendedReal, Arithmetic) {
  const ExtendedReal inf = ExtendedReal::infinity();
  EXPECT_TRUE((0.0 * inf).is_finite());
  EXPECT_EQ((0.0 * inf).value(), 0.0);
  EXPECT_TRUE((2.0 * inf).is_infinite());
  EXPECT_TRUE((ExtendedReal(1.0) + inf).is_infinite());
  EXPECT_LT(ExtendedReal(1e300), inf);
  EXPECT_THROW(inf.value(), NumericalError);
  EXPECT_EQ(to_string(inf), "inf");
  EXPECT_EQ(inf.as_double(), std::numeric_limits<double>::infinity());
}

TEST(Generator, NamesAreCaseInsensitive) {
  EXPECT_EQ(builtin_generator("kl").kind(), GeneratorKind::kl);
  EXPECT_EQ(builtin_generator("Reverse-KL").kind(), GeneratorKind::reverse_kl);
  EXPECT_EQ(builtin_generator("js").kind(), GeneratorKind::js);
  EXPECT_EQ(builtin_generator("PR").kind(), GeneratorKind::precision_recall);
  EXPECT_THROW(builtin_generator("hellinger-ish"), ValidationError);
  EXPECT_EQ(all_builtin_generators().size(), 8u);
}

TEST(Generator, KlLimits) {
  const FGenerator kl(GeneratorKind::kl);
  EXPECT_EQ(kl.at_zero().value(), 0.0);
  EXPECT_TRUE(kl.slope_at_infinity().is_infinite());
}

TEST(Generator, JsLimitsMatchNumericEvaluation) {
  const FGenerator js(GeneratorKind::js);
  EXPECT_EQ(js.at_zero().value(), 1.0);
  EXPECT_EQ(js.slope_at_infinity().value(), 1.0);
  EXPECT_EQ(js.range_bound().value(), 2.0);
  EXPECT_NEAR(js(1e-12), js.at_zero().value(), 1e-9);
  EXPECT_NEAR(js(1e12) / 1e12, js.slope_at_infinity().value(), 1e-9);
}

TEST(Generator, TvLimitsAndMaximum) {
  const FGenerator tv(GeneratorKind::tv);
  EXPECT_EQ(tv.at_zero().value(), 0.5);
  EXPECT_EQ(tv.slope_at_infinity().value(), 0.5);
  GridSpec g{0.0, 1.0, 4};
  GriddedDensity p(g, {0.5, 0.5, 0.0, 0.0});
  GriddedDensity q(g, {0.0, 0.0, 0.5, 0.5});
  EXPECT_DOUBLE_EQ(f_divergence(tv, p, q).value(), 1.0);
}

TEST(Generator, UnitAtOneAndConvexity) {
  for (const FGenerator& f : all_builtin_generators()) {
    EXPECT_EQ(f(1.0), 0.0) << f.name();
    for (double t : {0.1, 0.5, 2.0, 7.0}) {
      const double mid = 0.5 * (f(t) + f(1.5 * t));
      EXPECT_GE(mid + 1e-14, f(1.25 * t)) << f.name() << " t=" << t;
    }
  }
}

TEST(Generator, PerspectiveMatchesDirectForm) {
  for (const FGenerator& f : all_builtin_generators()) {
    for (double p : {0.01, 0.3, 0.9}) {
      for (double q : {0.02, 0.4, 0.8}) {
        EXPECT_NEAR(f.perspective(p, q), q * f(p / q), 1e-14) << f.name();
      }
    }
  }
}

TEST(Generator, DerivativeMatchesFiniteDifference) {
  for (const FGenerator& f : all_builtin_generators()) {
    if (f.support_based()) continue;
    for (double t : {0.2, 0.7, 1.6, 4.0}) {
      if (f.kind() == GeneratorKind::tv && t == 1.0) continue;
      const double h = 1e-6 * t;
      const double fd = (f(t + h) - f(t - h)) / (2 * h);
      EXPECT_NEAR(f.derivative(t), fd, 1e-6 * std::max(1.0, std::abs(fd))) << f.name();
    }
  }
}

TEST(FDivergence, SelfDivergenceIsZero) {
  std::mt19937_64 rng(1);
  GridSpec g{-1.0, 1.0, 30};
  const auto p = fixtures::random_density(g, rng, 0.3);
  for (const FGenerator& f : all_builtin_generators()) {
    EXPECT_EQ(f_divergence(f, p, p).value(), 0.0) << f.name();
  }
}

TEST(FDivergence, KlTwoPoint) {
  GriddedDensity p(kTwo, {0.5, 0.5});
  GriddedDensity q(kTwo, {0.25, 0.75});
  // 0.5 ln 2 + 0.5 ln(2/3), evaluated independently.
  EXPECT_NEAR(f_divergence(FGenerator(GeneratorKind::kl), p, q).value(), 0.143841036225890, 1e-15);
}

TEST(FDivergence, ChiSquareTwoPoint) {
  GriddedDensity p(kTwo, {0.5, 0.5});
  GriddedDensity q(kTwo, {0.25, 0.75});
  const double expect = 0.25 * 0.25 / 0.25 + 0.25 * 0.25 / 0.75;
  EXPECT_NEAR(f_divergence(FGenerator(GeneratorKind::chi2), p, q).value(), expect, 1e-15);
}

TEST(FDivergence, TvSupportTerm) {
  GriddedDensity p(kTwo, {0.3, 0.7});
  GriddedDensity q(kTwo, {0.0, 1.0});
  const FGenerator tv(GeneratorKind::tv);
  const double d = f_divergence(tv, p, q).value();
  const double on_support = 1.0 * tv(0.7);
  EXPECT_NEAR(d - on_support, 0.15, 1e-15);
  EXPECT_NEAR(d, 0.5 * sum_abs_diff(p, q), 1e-15);
}

TEST(FDivergence, ZeroMassUsesStoredLimit) {
  GriddedDensity p(kTwo, {0.0, 1.0});
  GriddedDensity q(kTwo, {0.5, 0.5});
  const FGenerator js(GeneratorKind::js);
  EXPECT_DOUBLE_EQ(f_divergence(js, p, q).value(), 0.5 * 1.0 + 0.5 * js(2.0));
}

TEST(FDivergence, InfiniteWhenSupportEscapes) {
  GriddedDensity p(kTwo, {0.5, 0.5});
  GriddedDensity q(kTwo, {1.0, 0.0});
  EXPECT_TRUE(f_divergence(FGenerator(GeneratorKind::kl), p, q).is_infinite());
  EXPECT_TRUE(f_divergence(FGenerator(GeneratorKind::chi2), p, q).is_infinite());
  EXPECT_TRUE(f_divergence(FGenerator(GeneratorKind::reverse_kl), q, p).is_infinite());
  EXPECT_DOUBLE_EQ(f_divergence(FGenerator(GeneratorKind::reverse_kl), p, q).value(),
                   1.0 * std::log(2.0));
}

TEST(FDivergence, JsRangeIsTwoBits) {
  GriddedDensity p(kTwo, {1.0, 0.0});
  GriddedDensity q(kTwo, {0.0, 1.0});
  EXPECT_DOUBLE_EQ(f_divergence(FGenerator(GeneratorKind::js), p, q).value(), 2.0);
}

TEST(FDivergence, GridMismatchIsRejected) {
  GriddedDensity p(kTwo, {0.5, 0.5});
  GriddedDensity q(GridSpec{0.0, 2.0, 2}, {0.5, 0.5});
  EXPECT_THROW(f_divergence(FGenerator(GeneratorKind::kl), p, q), ValidationError);
}

TEST(FDivergence, StrictlyConvexSeparatesDistinctPairs) {
  std::mt19937_64 rng(2);
  GridSpec g{-1.0, 1.0, 16};
  for (const FGenerator& f : all_builtin_generators()) {
    if (!f.strictly_convex()) continue;
    for (int t = 0; t < 20; ++t) {
      const auto p = fixtures::random_density(g, rng);
      const auto q = fixtures::random_density(g, rng);
      EXPECT_GT(f_divergence(f, p, q).value(), 0.0) << f.name();
    }
  }
}

TEST(PrecisionRecall, Identity) {
  GriddedDensity p(kTwo, {0.4, 0.6});
  const auto pr = support_precision_recall(p, p);
  EXPECT_EQ(pr.precision, 1.0);
  EXPECT_EQ(pr.recall, 1.0);
}

TEST(PrecisionRecall, DisjointSupports) {
  GriddedDensity p(kTwo, {1.0, 0.0});
  GriddedDensity q(kTwo, {0.0, 1.0});
  const auto pr = support_precision_recall(q, p);
  EXPECT_EQ(pr.precision, 0.0);
  EXPECT_EQ(pr.recall, 0.0);
}

TEST(PrecisionRecall, UniformModelHalfSupportedTarget) {
  GridSpec g{0.0, 1.0, 6};
  GriddedDensity q = GriddedDensity::uniform(g);
  GriddedDensity p(g, {0.2, 0.5, 0.3, 0.0, 0.0, 0.0});
  const auto pr = support_precision_recall(q, p);
  EXPECT_NEAR(pr.precision, 0.5, 1e-15);
  EXPECT_EQ(pr.recall, 1.0);
}

TEST(PrecisionRecall, SupportGeneratorsMeasureComplements) {
  std::mt19937_64 rng(3);
  GridSpec g{0.0, 1.0, 20};
  for (int t = 0; t < 10; ++t) {
    const auto p = fixtures::random_density(g, rng, 0.4);
    const auto q = fixtures::random_density(g, rng, 0.4);
    const auto pr = support_precision_recall(q, p);
    EXPECT_NEAR(f_divergence(FGenerator(GeneratorKind::precision), p, q).value(),
                1.0 - pr.precision, 1e-14);
    EXPECT_NEAR(f_divergence(FGenerator(GeneratorKind::recall), p, q).value(), 1.0 - pr.recall,
                1e-14);
    EXPECT_NEAR(f_divergence(FGenerator(GeneratorKind::precision_recall), p, q).value(),
                2.0 - pr.precision - pr.recall, 1e-14);
  }
}

TEST(PrecisionRecall, SupportToleranceDropsTinyCells) {
  GriddedDensity q(kTwo, {1e-9, 1.0 - 1e-9});
  GriddedDensity p(kTwo, {0.5, 0.5});
  EXPECT_EQ(support_precision_recall(q, p).recall, 1.0);
  EXPECT_NEAR(support_precision_recall(q.with_support_tol(1e-6), p).recall, 0.5, 1e-15);
}

TEST(Decomposition, EqualConditionalsGiveZero) {
  std::mt19937_64 rng(4);
  GridSpec g{-1.0, 1.0, 20};
  const auto part = AttributePartition::half_line(g);
  const auto p = fixtures::random_grouped(part, {0.3, 0.7}, rng);
  for (const FGenerator& f : all_builtin_generators()) {
    const auto c = decomposition_check(f, p, p);
    EXPECT_EQ(c.lhs.value(), 0.0);
    EXPECT_EQ(c.rhs.value(), 0.0);
  }
}

TEST(Decomposition, RandomMgoPairs) {
  std::mt19937_64 rng(5);
  GridSpec g{-1.0, 1.0, 24};
  const auto part = fixtures::block_partition(g, 3);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto props = fixtures::random_simplex(3, rng);
    const auto p = fixtures::random_grouped(part, props, rng, 0.2);
    const auto q = fixtures::random_grouped(part, props, rng, 0.2);
    for (const FGenerator& f : all_builtin_generators()) {
      const auto c = decomposition_check(f, p, q);
      EXPECT_EQ(c.lhs.is_infinite(), c.rhs.is_infinite()) << f.name();
      worst = std::max(worst, c.residual);
    }
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(Decomposition, RefusesProportionMismatch) {
  std::mt19937_64 rng(6);
  GridSpec g{-1.0, 1.0, 20};
  const auto part = AttributePartition::half_line(g);
  const auto p = fixtures::random_grouped(part, {0.5, 0.5}, rng);
  const auto q = fixtures::random_grouped(part, {0.44, 0.56}, rng);
  EXPECT_THROW(decomposition_check(FGenerator(GeneratorKind::js), p, q), ValidationError);
}
