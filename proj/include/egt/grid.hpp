#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace egt {

/// Uniform partition of [lo, hi] into n_cells cells.
struct GridSpec {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n_cells = 2;

  /// Throws ValidationError unless lo < hi and n_cells >= 2.
  void validate() const;

  double width() const { return (hi - lo) / static_cast<double>(n_cells); }
  double center(std::size_t i) const;
  /// Cell containing x. The right edge hi belongs to the last cell.
  std::size_t cell_of(double x) const;
  bool contains(double x) const { return x >= lo && x <= hi; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// A probability distribution stored as nonnegative cell masses.
///
/// Masses, not densities: every ratio p_i/q_i and every weight q_i is
/// invariant to the cell width, so divergences need no width factor. A cell
/// is in the support iff its mass exceeds support_tol (0 by default).
class GriddedDensity {
 public:
  static constexpr double kSumTolerance = 1e-12;

  /// Validates nonnegativity and unit total mass.
  GriddedDensity(GridSpec grid, std::vector<double> mass, double support_tol = 0.0);

  /// Normalizes nonnegative weights to unit mass.
  static GriddedDensity from_weights(GridSpec grid, std::vector<double> weights,
                                     double support_tol = 0.0);
  static GriddedDensity uniform(GridSpec grid);
  static GriddedDensity point_mass(GridSpec grid, std::size_t cell);

  const GridSpec& grid() const { return grid_; }
  std::span<const double> mass() const { return mass_; }
  double operator[](std::size_t i) const { return mass_[i]; }
  std::size_t size() const { return mass_.size(); }
  double support_tol() const { return support_tol_; }
  bool in_support(std::size_t i) const { return mass_[i] > support_tol_; }
  std::vector<std::size_t> support() const;

  GriddedDensity with_support_tol(double tol) const;

 private:
  GridSpec grid_;
  std::vector<double> mass_;
  double support_tol_ = 0.0;
};

/// The attribute oracle on a grid: one label per cell.
class AttributePartition {
 public:
  AttributePartition(GridSpec grid, std::vector<std::size_t> labels,
                     std::vector<std::string> names = {});

  /// Two groups split at `threshold`: cells with center < threshold get
  /// label 0, the rest label 1.
  static AttributePartition half_line(GridSpec grid, double threshold = 0.0);

  const GridSpec& grid() const { return grid_; }
  std::size_t num_groups() const { return names_.size(); }
  std::size_t label(std::size_t cell) const { return labels_[cell]; }
  std::span<const std::size_t> labels() const { return labels_; }
  std::span<const std::size_t> cells_of(std::size_t group) const { return cells_[group]; }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const AttributePartition& a, const AttributePartition& b) {
    return a.grid_ == b.grid_ && a.labels_ == b.labels_;
  }

 private:
  GridSpec grid_;
  std::vector<std::size_t> labels_;
  std::vector<std::string> names_;
  std::vector<std::vector<std::size_t>> cells_;
};

/// Mixture P = sum_a pi_a P_a with P_a supported on its group's cells.
///
/// Groups with zero proportion may carry no conditional; such groups are
/// flagged by has_conditional() == false.
class GroupedDistribution {
 public:
  GroupedDistribution(AttributePartition partition, std::vector<double> proportions,
                      std::vector<std::optional<GriddedDensity>> conditionals);

  const AttributePartition& partition() const { return partition_; }
  std::size_t num_groups() const { return proportions_.size(); }
  std::span<const double> proportions() const { return proportions_; }
  double proportion(std::size_t a) const { return proportions_[a]; }
  bool has_conditional(std::size_t a) const { return conditionals_[a].has_value(); }
  /// Throws ValidationError for a flagged empty group.
  const GriddedDensity& conditional(std::size_t a) const;
  /// Every group has positive proportion.
  bool is_nontrivial() const;

 private:
  AttributePartition partition_;
  std::vector<double> proportions_;
  std::vector<std::optional<GriddedDensity>> conditionals_;
};

GroupedDistribution decompose(const GriddedDensity& dist, const AttributePartition& partition);
GriddedDensity recombine(const GroupedDistribution& gd);

/// Normal cell masses (exact integrals over each cell) on `region`,
/// normalized. Computed in log space, so far-tail truncations stay finite.
GriddedDensity truncated_gaussian(const GridSpec& grid, double mean, double std_dev,
                                  std::span<const std::size_t> region);

/// N(mu, sigma^2) restricted to each group and renormalized, mixed with the
/// given proportions.
GroupedDistribution rescaled_gaussian_model(const GridSpec& grid, double mu, double sigma,
                                            const AttributePartition& partition,
                                            std::span<const double> proportions);

/// Two-group target: truncated Gaussians with means -offset / +offset and a
/// common std on the negative / nonnegative half-lines, equal proportions.
GroupedDistribution warmup_target(const GridSpec& grid, double offset = 0.5,
                                  double std_dev = 0.3);

}  // namespace egt
