#include "egt/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "egt/error.hpp"

namespace egt {

namespace {

double kahan_sum(std::span<const double> xs) {
  double sum = 0.0;
  double carry = 0.0;
  for (double x : xs) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw ValidationError(std::string(what) + ": grid mismatch");
}

}  // namespace

void GridSpec::validate() const {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ValidationError("grid: require finite lo < hi");
  }
  if (n_cells < 2) throw ValidationError("grid: require n_cells >= 2");
}

double GridSpec::center(std::size_t i) const {
  return lo + (static_cast<double>(i) + 0.5) * width();
}

std::size_t GridSpec::cell_of(double x) const {
  if (!contains(x)) {
    std::ostringstream msg;
    msg << "value " << x << " outside grid [" << lo << ", " << hi << "]";
    throw ValidationError(msg.str());
  }
  const auto i = static_cast<std::size_t>(std::floor((x - lo) / width()));
  return std::min(i, n_cells - 1);
}

GriddedDensity::GriddedDensity(GridSpec grid, std::vector<double> mass, double support_tol)
    : grid_(grid), mass_(std::move(mass)), support_tol_(support_tol) {
  grid_.validate();
  if (mass_.size() != grid_.n_cells) {
    throw ValidationError("density: mass length does not match n_cells");
  }
  if (!(support_tol_ >= 0.0)) throw ValidationError("density: support_tol must be >= 0");
  for (double m : mass_) {
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw ValidationError("density: masses must be finite and nonnegative");
    }
  }
  const double total = kahan_sum(mass_);
  if (std::abs(total - 1.0) > kSumTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "density: total mass " << total << " differs from 1";
    throw ValidationError(msg.str());
  }
}

GriddedDensity GriddedDensity::from_weights(GridSpec grid, std::vector<double> weights,
                                            double support_tol) {
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("density: weights must be finite and nonnegative");
    }
  }
  const double total = kahan_sum(weights);
  if (!(total > 0.0)) throw NumericalError("density: weights sum to zero");
  for (double& w : weights) w /= total;
  return GriddedDensity(grid, std::move(weights), support_tol);
}

GriddedDensity GriddedDensity::uniform(GridSpec grid) {
  grid.validate();
  return from_weights(grid, std::vector<double>(grid.n_cells, 1.0));
}

GriddedDensity GriddedDensity::point_mass(GridSpec grid, std::size_t cell) {
  grid.validate();
  if (cell >= grid.n_cells) throw ValidationError("point_mass: cell out of range");
  std::vector<double> m(grid.n_cells, 0.0);
  m[cell] = 1.0;
  return GriddedDensity(grid, std::move(m));
}

std::vector<std::size_t> GriddedDensity::support() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mass_.size(); ++i) {
    if (in_support(i)) out.push_back(i);
  }
  return out;
}

GriddedDensity GriddedDensity::with_support_tol(double tol) const {
  GriddedDensity copy = *this;
  if (!(tol >= 0.0)) throw ValidationError("density: support_tol must be >= 0");
  copy.support_tol_ = tol;
  return copy;
}

AttributePartition::AttributePartition(GridSpec grid, std::vector<std::size_t> labels,
                                       std::vector<std::string> names)
    : grid_(grid), labels_(std::move(labels)), names_(std::move(names)) {
  grid_.validate();
  if (labels_.size() != grid_.n_cells) {
    throw ValidationError("partition: label count does not match n_cells");
  }
  const std::size_t k = 1 + *std::max_element(labels_.begin(), labels_.end());
  if (names_.empty()) {
    for (std::size_t a = 0; a < std::max<std::size_t>(k, 2); ++a) {
      names_.push_back(std::to_string(a));
    }
  }
  if (names_.size() < 2) throw ValidationError("partition: need at least two attributes");
  if (k > names_.size()) throw ValidationError("partition: label exceeds attribute count");
  cells_.assign(names_.size(), {});
  for (std::size_t i = 0; i < labels_.size(); ++i) cells_[labels_[i]].push_back(i);
}

AttributePartition AttributePartition::half_line(GridSpec grid, double threshold) {
  grid.validate();
  std::vector<std::size_t> labels(grid.n_cells);
  for (std::size_t i = 0; i < grid.n_cells; ++i) {
    labels[i] = grid.center(i) < threshold ? 0 : 1;
  }
  return AttributePartition(grid, std::move(labels), {"0", "1"});
}

GroupedDistribution::GroupedDistribution(AttributePartition partition,
                                         std::vector<double> proportions,
                                         std::vector<std::optional<GriddedDensity>> conditionals)
    : partition_(std::move(partition)),
      proportions_(std::move(proportions)),
      conditionals_(std::move(conditionals)) {
  const std::size_t k = partition_.num_groups();
  if (proportions_.size() != k || conditionals_.size() != k) {
    throw ValidationError("grouped: proportions/conditionals must have one entry per group");
  }
  for (double p : proportions_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ValidationError("grouped: proportions must be finite and nonnegative");
    }
  }
  if (std::abs(kahan_sum(proportions_) - 1.0) > GriddedDensity::kSumTolerance) {
    throw ValidationError("grouped: proportions must sum to 1");
  }
  for (std::size_t a = 0; a < k; ++a) {
    if (!conditionals_[a]) {
      if (proportions_[a] > 0.0) {
        throw ValidationError("grouped: group with positive proportion lacks a conditional");
      }
      continue;
    }
    const GriddedDensity& c = *conditionals_[a];
    require_same_grid(c.grid(), partition_.grid(), "grouped");
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i] != 0.0 && partition_.label(i) != a) {
        throw ValidationError("grouped: conditional " + std::to_string(a) +
                              " has mass outside its group");
      }
    }
  }
}

const GriddedDensity& GroupedDistribution::conditional(std::size_t a) const {
  if (a >= conditionals_.size()) throw ValidationError("grouped: group index out of range");
  if (!conditionals_[a]) {
    throw ValidationError("grouped: group " + std::to_string(a) + " is empty (zero proportion)");
  }
  return *conditionals_[a];
}

bool GroupedDistribution::is_nontrivial() const {
  return std::all_of(proportions_.begin(), proportions_.end(), [](double p) { return p > 0.0; });
}

GroupedDistribution decompose(const GriddedDensity& dist, const AttributePartition& partition) {
  require_same_grid(dist.grid(), partition.grid(), "decompose");
  const std::size_t k = partition.num_groups();
  std::vector<double> proportions(k, 0.0);
  std::vector<std::optional<GriddedDensity>> conditionals(k);
  for (std::size_t a = 0; a < k; ++a) {
    std::vector<double> group_mass;
    for (std::size_t i : partition.cells_of(a)) group_mass.push_back(dist[i]);
    proportions[a] = kahan_sum(group_mass);
  }
  for (std::size_t a = 0; a < k; ++a) {
    if (!(proportions[a] > 0.0)) continue;
    std::vector<double> m(dist.size(), 0.0);
    for (std::size_t i : partition.cells_of(a)) m[i] = dist[i] / proportions[a];
    conditionals[a] = GriddedDensity(dist.grid(), std::move(m), dist.support_tol());
  }
  return GroupedDistribution(partition, std::move(proportions), std::move(conditionals));
}

GriddedDensity recombine(const GroupedDistribution& gd) {
  const AttributePartition& part = gd.partition();
  std::vector<double> m(part.grid().n_cells, 0.0);
  double tol = 0.0;
  for (std::size_t a = 0; a < gd.num_groups(); ++a) {
    if (!gd.has_conditional(a)) continue;
    const GriddedDensity& c = gd.conditional(a);
    tol = std::max(tol, c.support_tol());
    for (std::size_t i : part.cells_of(a)) m[i] = gd.proportion(a) * c[i];
  }
  return GriddedDensity(part.grid(), std::move(m), tol);
}

namespace {

// log(exp(x^2) erfc(x)) for x >= 0. Beyond x = 5 the continued fraction
// erfc(x) = exp(-x^2) / sqrt(pi) / (x + (1/2) / (x + 1 / (x + (3/2) / ...)))
// keeps far tails representable.
double log_erfcx(double x) {
  if (x < 5.0) return x * x + std::log(std::erfc(x));
  double t = x;
  for (int n = 20; n >= 1; --n) t = x + 0.5 * n / t;
  return -std::log(t) - 0.5 * std::log(M_PI);
}

// Standardized cell edge u = (x - mean) / (std sqrt 2) with log_erfcx(|u|).
struct Edge {
  double u = 0.0;
  double lec = std::numeric_limits<double>::quiet_NaN();
};

// log of the normal mass between two edges.
double log_normal_mass(const Edge& a, const Edge& b) {
  if (a.u >= 0.0) {
    const double l = -(b.u - a.u) * (b.u + a.u) + b.lec - a.lec;
    return std::log(0.5) + a.lec - a.u * a.u + std::log(-std::expm1(l));
  }
  if (b.u <= 0.0) return log_normal_mass(Edge{-b.u, b.lec}, Edge{-a.u, a.lec});
  return std::log(0.5 * (std::erf(b.u) - std::erf(a.u)));
}

}  // namespace

GriddedDensity truncated_gaussian(const GridSpec& grid, double mean, double std_dev,
                                  std::span<const std::size_t> region) {
  grid.validate();
  if (!(std_dev > 0.0)) throw ValidationError("truncated_gaussian: std must be > 0");
  if (region.empty()) throw ValidationError("truncated_gaussian: empty region");
  const double scale = 1.0 / (std_dev * std::sqrt(2.0));
  const double span = grid.hi - grid.lo;
  const auto n = static_cast<double>(grid.n_cells);
  std::vector<Edge> edges(grid.n_cells + 1);
  auto edge = [&](std::size_t e) -> const Edge& {
    Edge& out = edges[e];
    if (std::isnan(out.lec)) {
      const double x = e == grid.n_cells ? grid.hi : grid.lo + span * (static_cast<double>(e) / n);
      out.u = (x - mean) * scale;
      out.lec = log_erfcx(std::abs(out.u));
    }
    return out;
  };
  std::vector<double> logw(region.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < region.size(); ++k) {
    const std::size_t i = region[k];
    if (i >= grid.n_cells) throw ValidationError("truncated_gaussian: cell out of range");
    logw[k] = log_normal_mass(edge(i), edge(i + 1));
    if (std::isnan(logw[k])) throw NumericalError("truncated_gaussian: NaN log-weight");
    peak = std::max(peak, logw[k]);
  }
  if (!std::isfinite(peak)) {
    throw NumericalError("truncated_gaussian: Gaussian mass underflows on the whole region");
  }
  std::vector<double> m(grid.n_cells, 0.0);
  for (std::size_t k = 0; k < region.size(); ++k) m[region[k]] = std::exp(logw[k] - peak);
  return GriddedDensity::from_weights(grid, std::move(m));
}

GroupedDistribution rescaled_gaussian_model(const GridSpec& grid, double mu, double sigma,
                                            const AttributePartition& partition,
                                            std::span<const double> proportions) {
  require_same_grid(grid, partition.grid(), "rescaled_gaussian_model");
  if (!(sigma > 0.0)) throw ValidationError("rescaled_gaussian_model: sigma must be > 0");
  const std::size_t k = partition.num_groups();
  if (proportions.size() != k) {
    throw ValidationError("rescaled_gaussian_model: one proportion per group required");
  }
  std::vector<std::optional<GriddedDensity>> conds(k);
  for (std::size_t a = 0; a < k; ++a) {
    if (proportions[a] > 0.0 || !partition.cells_of(a).empty()) {
      if (partition.cells_of(a).empty()) {
        throw ValidationError("rescaled_gaussian_model: group has no cells");
      }
      conds[a] = truncated_gaussian(grid, mu, sigma, partition.cells_of(a));
    }
  }
  return GroupedDistribution(partition, {proportions.begin(), proportions.end()},
                             std::move(conds));
}

GroupedDistribution warmup_target(const GridSpec& grid, double offset, double std_dev) {
  AttributePartition part = AttributePartition::half_line(grid, 0.0);
  std::vector<std::optional<GriddedDensity>> conds;
  conds.emplace_back(truncated_gaussian(grid, -offset, std_dev, part.cells_of(0)));
  conds.emplace_back(truncated_gaussian(grid, offset, std_dev, part.cells_of(1)));
  return GroupedDistribution(std::move(part), {0.5, 0.5}, std::move(conds));
}

}  // namespace egt
