#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <numeric>

#include "egt/divergence.hpp"
#include "egt/error.hpp"
#include "egt/grid.hpp"
#include "support.hpp"

using namespace egt;

namespace {

double total(std::span<const double> m) { return std::accumulate(m.begin(), m.end(), 0.0); }

std::vector<std::size_t> all_cells(const GridSpec& g) {
  std::vector<std::size_t> c(g.n_cells);
  std::iota(c.begin(), c.end(), 0);
  return c;
}

}  // namespace

TEST(Grid, CellGeometry) {
  GridSpec g{-2.0, 2.0, 4};
  EXPECT_DOUBLE_EQ(g.width(), 1.0);
  EXPECT_DOUBLE_EQ(g.center(0), -1.5);
  EXPECT_EQ(g.cell_of(-2.0), 0u);
  EXPECT_EQ(g.cell_of(2.0), 3u);
  EXPECT_EQ(g.cell_of(0.0), 2u);
  EXPECT_THROW((GridSpec{1.0, 1.0, 4}.validate()), ValidationError);
  EXPECT_THROW((GridSpec{0.0, 1.0, 1}.validate()), ValidationError);
}

TEST(GriddedDensity, RejectsInvalidMass) {
  GridSpec g{0.0, 1.0, 2};
  EXPECT_THROW(GriddedDensity(g, {0.5, 0.6}), ValidationError);
  EXPECT_THROW(GriddedDensity(g, {-0.1, 1.1}), ValidationError);
  EXPECT_THROW(GriddedDensity(g, {1.0}), ValidationError);
  EXPECT_NO_THROW(GriddedDensity(g, {0.25, 0.75}));
}

TEST(Decompose, UniformFourCells) {
  GridSpec g{0.0, 4.0, 4};
  AttributePartition part(g, {0, 0, 1, 1});
  const auto gd = decompose(GriddedDensity::uniform(g), part);
  EXPECT_DOUBLE_EQ(gd.proportion(0), 0.5);
  EXPECT_DOUBLE_EQ(gd.proportion(1), 0.5);
  EXPECT_DOUBLE_EQ(gd.conditional(0)[0], 0.5);
  EXPECT_DOUBLE_EQ(gd.conditional(0)[1], 0.5);
  EXPECT_DOUBLE_EQ(gd.conditional(0)[2], 0.0);
  EXPECT_DOUBLE_EQ(gd.conditional(1)[3], 0.5);
}

TEST(Decompose, ProportionsFromMass) {
  GridSpec g{0.0, 4.0, 4};
  AttributePartition part(g, {0, 0, 1, 1});
  const auto gd = decompose(GriddedDensity(g, {0.22, 0.22, 0.28, 0.28}), part);
  EXPECT_NEAR(gd.proportion(0), 0.44, 1e-15);
  EXPECT_NEAR(gd.proportion(1), 0.56, 1e-15);
}

TEST(Decompose, EmptyGroupIsFlagged) {
  GridSpec g{0.0, 4.0, 4};
  AttributePartition part(g, {0, 0, 1, 1});
  const auto gd = decompose(GriddedDensity(g, {0.5, 0.5, 0.0, 0.0}), part);
  EXPECT_FALSE(gd.has_conditional(1));
  EXPECT_FALSE(gd.is_nontrivial());
  EXPECT_THROW(gd.conditional(1), ValidationError);
}

TEST(Recombine, SingleActiveGroup) {
  GridSpec g{0.0, 4.0, 4};
  AttributePartition part(g, {0, 0, 1, 1});
  GriddedDensity c0(g, {0.3, 0.7, 0.0, 0.0});
  GroupedDistribution gd(part, {1.0, 0.0}, {c0, std::nullopt});
  const auto d = recombine(gd);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(d[i], c0[i]);
}

TEST(Recombine, SymmetricHalvesGiveUniform) {
  GridSpec g{0.0, 4.0, 4};
  AttributePartition part(g, {0, 0, 1, 1});
  GroupedDistribution gd(part, {0.5, 0.5},
                         {GriddedDensity(g, {0.5, 0.5, 0, 0}), GriddedDensity(g, {0, 0, 0.5, 0.5})});
  const auto d = recombine(gd);
  for (double m : d.mass()) EXPECT_DOUBLE_EQ(m, 0.25);
}

TEST(RoundTrip, RecombineDecompose) {
  std::mt19937_64 rng(11);
  GridSpec g{-1.0, 1.0, 64};
  const auto part = AttributePartition::half_line(g);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = fixtures::random_density(g, rng);
    const auto back = recombine(decompose(d, part));
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(back[i], d[i], 1e-14);
    EXPECT_NEAR(total(back.mass()), 1.0, 1e-12);
  }
}

TEST(RoundTrip, DecomposeRecombine) {
  std::mt19937_64 rng(12);
  GridSpec g{-1.0, 1.0, 60};
  const auto part = fixtures::block_partition(g, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gd = fixtures::random_grouped(part, fixtures::random_simplex(3, rng), rng, 0.2);
    const auto back = decompose(recombine(gd), part);
    double s = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      s += back.proportion(a);
      EXPECT_NEAR(back.proportion(a), gd.proportion(a), 1e-14);
      for (std::size_t i = 0; i < g.n_cells; ++i) {
        EXPECT_NEAR(back.conditional(a)[i], gd.conditional(a)[i], 1e-14);
      }
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(GroupedDistribution, RejectsConditionalOutsideGroup) {
  GridSpec g{0.0, 4.0, 4};
  AttributePartition part(g, {0, 0, 1, 1});
  EXPECT_THROW(GroupedDistribution(part, {0.5, 0.5},
                                   {GriddedDensity(g, {0.5, 0, 0.5, 0}),
                                    GriddedDensity(g, {0, 0, 0.5, 0.5})}),
               ValidationError);
}

TEST(TruncatedGaussian, WarmupGroupZero) {
  GridSpec g{-2.0, 2.0, 80};
  const auto part = AttributePartition::half_line(g);
  const auto p0 = truncated_gaussian(g, -0.5, 0.3, part.cells_of(0));
  const auto warm = warmup_target(g);
  for (std::size_t i = 0; i < g.n_cells; ++i) EXPECT_DOUBLE_EQ(p0[i], warm.conditional(0)[i]);
  EXPECT_NEAR(total(p0.mass()), 1.0, 1e-12);
  for (std::size_t i : part.cells_of(1)) EXPECT_EQ(p0[i], 0.0);
}

TEST(TruncatedGaussian, SymmetricAboutCenter) {
  GridSpec g{-2.0, 2.0, 101};
  const auto d = truncated_gaussian(g, 0.0, 0.7, all_cells(g));
  for (std::size_t i = 0; i < g.n_cells; ++i) EXPECT_NEAR(d[i], d[g.n_cells - 1 - i], 1e-12);
}

TEST(TruncatedGaussian, FarTailMatchesErfIntegrals) {
  using Big = boost::multiprecision::cpp_bin_float_50;
  GridSpec g{-2.0, 2.0, 400};
  const double mean = 10.0, sd = 0.1;
  const auto d = truncated_gaussian(g, mean, sd, all_cells(g));
  std::vector<Big> cell(g.n_cells);
  Big sum = 0;
  const Big root2sd = boost::multiprecision::sqrt(Big(2)) * Big(sd);
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    const Big lo = Big(g.lo) + Big(i) * Big(g.width());
    const Big hi = lo + Big(g.width());
    cell[i] = boost::multiprecision::erfc((Big(mean) - hi) / root2sd) -
              boost::multiprecision::erfc((Big(mean) - lo) / root2sd);
    sum += cell[i];
  }
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    EXPECT_NEAR(d[i], static_cast<double>(cell[i] / sum), 1e-6) << "cell " << i;
    if (d[i] > d[argmax]) argmax = i;
  }
  EXPECT_EQ(argmax, g.n_cells - 1);
}

TEST(RescaledGaussian, MirrorImages) {
  GridSpec g{-2.0, 2.0, 80};
  const auto part = AttributePartition::half_line(g);
  const std::vector<double> props{0.5, 0.5};
  const auto m = rescaled_gaussian_model(g, 0.0, 1.0, part, props);
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    EXPECT_NEAR(m.conditional(0)[i], m.conditional(1)[g.n_cells - 1 - i], 1e-15);
  }
}

TEST(RescaledGaussian, MatchesWarmupGroupOne) {
  GridSpec g{-2.0, 2.0, 80};
  const auto warm = warmup_target(g);
  const std::vector<double> props{0.5, 0.5};
  const auto m = rescaled_gaussian_model(g, 0.5, 0.3, warm.partition(), props);
  const FGenerator js(GeneratorKind::js);
  EXPECT_LT(f_divergence(js, warm.conditional(1), m.conditional(1)).value(), 0.01);
}

TEST(RescaledGaussian, KeepsGivenProportions) {
  GridSpec g{-2.0, 2.0, 80};
  const auto part = AttributePartition::half_line(g);
  const std::vector<double> props{0.44, 0.56};
  const auto m = rescaled_gaussian_model(g, 0.3, 0.8, part, props);
  EXPECT_EQ(m.proportion(0), 0.44);
  EXPECT_EQ(m.proportion(1), 0.56);
}
