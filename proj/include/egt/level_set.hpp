#pragma once

#include <cstddef>
#include <vector>

#include "egt/divergence.hpp"
#include "egt/grid.hpp"

namespace egt {

/// n equally spaced values from lo to hi inclusive. Values are placed
/// symmetrically about the midpoint so a range symmetric about 0 yields
/// exactly mirrored values.
struct AxisRange {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 2;

  double at(std::size_t i) const;
};

struct SweepGrid {
  AxisRange mu{-1.5, 1.5, 301};
  AxisRange sigma{0.05, 2.0, 301};
  double epsilon = 1.0;

  void validate() const;
};

struct SweepEntry {
  double mu = 0.0;
  double sigma = 0.0;
  double global = 0.0;
  std::vector<double> cond;
  bool valid = false;  ///< false when the model underflows or a divergence is infinite
};

/// Global and per-group divergences of the rescaled Gaussian model
/// N(mu, sigma^2) (restricted per group, P's proportions) from P.
SweepEntry evaluate_rescaled(const GroupedDistribution& p, const FGenerator& f, double mu,
                             double sigma);

class SweepField {
 public:
  SweepField(GroupedDistribution p, FGenerator f, SweepGrid grid,
             std::vector<SweepEntry> entries);

  const GroupedDistribution& target() const { return p_; }
  const FGenerator& generator() const { return f_; }
  const SweepGrid& grid() const { return grid_; }
  /// Entry at (mu index, sigma index).
  const SweepEntry& at(std::size_t i, std::size_t j) const {
    return entries_[i * grid_.sigma.n + j];
  }
  const std::vector<SweepEntry>& entries() const { return entries_; }

 private:
  GroupedDistribution p_;
  FGenerator f_;
  SweepGrid grid_;
  std::vector<SweepEntry> entries_;
};

/// Dense (mu, sigma) field of divergences from P.
SweepField sweep(const GroupedDistribution& p, const SweepGrid& grid, const FGenerator& f);

struct LevelSetPoint {
  double mu = 0.0;
  double sigma = 0.0;
  double global = 0.0;
  std::vector<double> cond;
  double delta_egt = 0.0;
};

/// Points with |D_f(P || Q) - epsilon| <= level_tol, found by bisection
/// along every lattice edge whose endpoints straddle epsilon, sorted by mu
/// then sigma. Throws ValidationError when the level set is empty.
std::vector<LevelSetPoint> extract_level_set(const SweepField& field, double epsilon,
                                             double level_tol = 1e-4);

struct ImbalanceExtremes {
  LevelSetPoint balanced;  ///< smallest delta_egt
  LevelSetPoint worst;     ///< largest delta_egt
};

/// Ties keep the first point in list order. Throws ValidationError on an
/// empty list.
ImbalanceExtremes imbalance_extremes(const std::vector<LevelSetPoint>& points);

}  // namespace egt
