#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "egt/grid.hpp"

namespace egt::fixtures {

inline GriddedDensity random_density(const GridSpec& g, std::mt19937_64& rng,
                                     double hole_prob = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(g.n_cells);
  bool any = false;
  for (double& x : w) {
    x = u(rng) < hole_prob ? 0.0 : 0.05 + u(rng);
    any = any || x > 0.0;
  }
  if (!any) w[0] = 1.0;
  return GriddedDensity::from_weights(g, std::move(w));
}

/// Partition of a grid into k contiguous blocks of near-equal size.
inline AttributePartition block_partition(const GridSpec& g, std::size_t k) {
  std::vector<std::size_t> labels(g.n_cells);
  for (std::size_t i = 0; i < g.n_cells; ++i) labels[i] = i * k / g.n_cells;
  return AttributePartition(g, labels);
}

inline std::vector<double> random_simplex(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> w(k);
  double s = 0.0;
  for (double& x : w) s += (x = u(rng));
  for (double& x : w) x /= s;
  return w;
}

/// Random grouped distribution; conditionals may have holes.
inline GroupedDistribution random_grouped(const AttributePartition& part,
                                          const std::vector<double>& props, std::mt19937_64& rng,
                                          double hole_prob = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::optional<GriddedDensity>> conds;
  for (std::size_t a = 0; a < part.num_groups(); ++a) {
    std::vector<double> w(part.grid().n_cells, 0.0);
    bool any = false;
    for (std::size_t i : part.cells_of(a)) {
      w[i] = u(rng) < hole_prob ? 0.0 : 0.05 + u(rng);
      any = any || w[i] > 0.0;
    }
    if (!any) w[part.cells_of(a).front()] = 1.0;
    conds.emplace_back(GriddedDensity::from_weights(part.grid(), std::move(w)));
  }
  return GroupedDistribution(part, props, std::move(conds));
}

}  // namespace egt::fixtures
