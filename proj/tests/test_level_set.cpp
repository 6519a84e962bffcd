#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "egt/error.hpp"
#include "egt/level_set.hpp"

using namespace egt;

namespace {

const FGenerator kJs(GeneratorKind::js);

SweepGrid coarse() {
  SweepGrid g;
  g.mu = {-1.5, 1.5, 121};
  g.sigma = {0.05, 2.0, 121};
  return g;
}

const SweepField& warmup_field() {
  static const SweepField field = sweep(warmup_target(GridSpec{-3.0, 3.0, 600}), coarse(), kJs);
  return field;
}

}  // namespace

TEST(AxisRange, SymmetricValues) {
  const AxisRange r{-1.5, 1.5, 301};
  EXPECT_EQ(r.at(0), -1.5);
  EXPECT_EQ(r.at(300), 1.5);
  EXPECT_EQ(r.at(150), 0.0);
  for (std::size_t i = 0; i < 301; ++i) EXPECT_EQ(r.at(i), -r.at(300 - i));
}

TEST(SweepGrid, Validation) {
  SweepGrid g;
  EXPECT_NO_THROW(g.validate());
  g.sigma.lo = 0.0;
  EXPECT_THROW(g.validate(), ValidationError);
  g = SweepGrid{};
  g.mu.n = 1;
  EXPECT_THROW(g.validate(), ValidationError);
}

TEST(Sweep, OwnShapeHasZeroDivergence) {
  GridSpec g{-2.0, 2.0, 80};
  const auto part = AttributePartition::half_line(g);
  const std::vector<double> props{0.3, 0.7};
  const auto p = rescaled_gaussian_model(g, 0.2, 0.7, part, props);
  const auto e = evaluate_rescaled(p, kJs, 0.2, 0.7);
  EXPECT_TRUE(e.valid);
  EXPECT_NEAR(e.global, 0.0, 1e-12);
  for (double c : e.cond) EXPECT_NEAR(c, 0.0, 1e-12);
}

TEST(Sweep, EntriesAreMuMajor) {
  const auto& field = warmup_field();
  const auto& grid = field.grid();
  EXPECT_EQ(field.entries().size(), grid.mu.n * grid.sigma.n);
  EXPECT_EQ(field.at(3, 7).mu, grid.mu.at(3));
  EXPECT_EQ(field.at(3, 7).sigma, grid.sigma.at(7));
}

TEST(LevelSet, PointsLieOnTheLevel) {
  const auto pts = extract_level_set(warmup_field(), 1.0, 1e-4);
  ASSERT_FALSE(pts.empty());
  for (const auto& pt : pts) EXPECT_LE(std::abs(pt.global - 1.0), 1e-4);
  EXPECT_TRUE(std::is_sorted(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.mu < b.mu || (a.mu == b.mu && a.sigma < b.sigma);
  }));
}

TEST(LevelSet, EmptyAboveFieldMaximum) {
  EXPECT_THROW(extract_level_set(warmup_field(), 50.0), ValidationError);
}

TEST(LevelSet, BalancedAndUnbalancedSolutions) {
  const auto pts = extract_level_set(warmup_field(), 1.0);
  const auto ex = imbalance_extremes(pts);
  EXPECT_LT(ex.balanced.delta_egt, 0.05);
  std::size_t strong_left = 0, strong_right = 0;
  for (const auto& pt : pts) {
    if (pt.delta_egt > 1.0) (pt.mu < 0 ? strong_left : strong_right)++;
  }
  EXPECT_GT(strong_left, 0u);
  EXPECT_GT(strong_right, 0u);
}

TEST(LevelSet, MirrorSymmetry) {
  const auto pts = extract_level_set(warmup_field(), 1.0);
  for (const auto& pt : pts) {
    const auto it = std::find_if(pts.begin(), pts.end(), [&](const LevelSetPoint& o) {
      return std::abs(o.mu + pt.mu) <= 1e-10 && std::abs(o.sigma - pt.sigma) <= 1e-10;
    });
    ASSERT_NE(it, pts.end()) << "no mirror for mu=" << pt.mu << " sigma=" << pt.sigma;
    EXPECT_NEAR(it->cond[0], pt.cond[1], 1e-10);
    EXPECT_NEAR(it->cond[1], pt.cond[0], 1e-10);
    EXPECT_NEAR(it->global, pt.global, 1e-10);
  }
}

TEST(LevelSet, BrittlenessWitnessExceedsOnePointEight) {
  const auto pts = extract_level_set(warmup_field(), 1.0);
  double worst = 0.0;
  for (const auto& pt : pts) worst = std::max(worst, pt.delta_egt);
  EXPECT_GT(worst, 1.8);
}

TEST(Extremes, SinglePoint) {
  LevelSetPoint pt{0.1, 0.4, 1.0, {0.9, 1.1}, 0.2};
  const auto ex = imbalance_extremes({pt});
  EXPECT_EQ(ex.balanced.mu, ex.worst.mu);
  EXPECT_EQ(ex.balanced.sigma, ex.worst.sigma);
  EXPECT_THROW(imbalance_extremes({}), ValidationError);
}

TEST(Extremes, TiesKeepFirst) {
  LevelSetPoint a{-0.5, 0.3, 1.0, {0.5, 1.5}, 1.0};
  LevelSetPoint b{0.5, 0.3, 1.0, {1.5, 0.5}, 1.0};
  const auto ex = imbalance_extremes({a, b});
  EXPECT_EQ(ex.worst.mu, -0.5);
  EXPECT_EQ(ex.balanced.mu, -0.5);
}
