#include "egt/level_set.hpp"

#include <algorithm>
#include <cmath>

#include "egt/error.hpp"

namespace egt {

double AxisRange::at(std::size_t i) const {
  const double mid = 0.5 * (lo + hi);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  return mid + (static_cast<double>(i) - 0.5 * static_cast<double>(n - 1)) * step;
}

void SweepGrid::validate() const {
  if (mu.n < 2 || sigma.n < 2) throw ValidationError("sweep: each axis needs n >= 2");
  if (!(mu.lo < mu.hi) || !(sigma.lo < sigma.hi)) {
    throw ValidationError("sweep: axis ranges need lo < hi");
  }
  if (!(sigma.lo > 0.0)) throw ValidationError("sweep: sigma range must be positive");
  if (!(epsilon > 0.0)) throw ValidationError("sweep: epsilon must be > 0");
}

SweepEntry evaluate_rescaled(const GroupedDistribution& p, const FGenerator& f, double mu,
                             double sigma) {
  SweepEntry e;
  e.mu = mu;
  e.sigma = sigma;
  try {
    const GroupedDistribution q = rescaled_gaussian_model(
        p.partition().grid(), mu, sigma, p.partition(), p.proportions());
    const ExtendedReal global = f_divergence(f, recombine(p), recombine(q));
    e.valid = global.is_finite();
    e.global = global.as_double();
    for (std::size_t a = 0; a < p.num_groups(); ++a) {
      const ExtendedReal d = f_divergence(f, p.conditional(a), q.conditional(a));
      e.valid = e.valid && d.is_finite();
      e.cond.push_back(d.as_double());
    }
  } catch (const NumericalError&) {
    e.valid = false;
  }
  return e;
}

SweepField::SweepField(GroupedDistribution p, FGenerator f, SweepGrid grid,
                       std::vector<SweepEntry> entries)
    : p_(std::move(p)), f_(std::move(f)), grid_(grid), entries_(std::move(entries)) {
  if (entries_.size() != grid_.mu.n * grid_.sigma.n) {
    throw ValidationError("sweep field: entry count does not match the lattice");
  }
}

SweepField sweep(const GroupedDistribution& p, const SweepGrid& grid, const FGenerator& f) {
  grid.validate();
  if (!p.is_nontrivial()) throw ValidationError("sweep: P is trivial");
  std::vector<SweepEntry> entries;
  entries.reserve(grid.mu.n * grid.sigma.n);
  for (std::size_t i = 0; i < grid.mu.n; ++i) {
    for (std::size_t j = 0; j < grid.sigma.n; ++j) {
      entries.push_back(evaluate_rescaled(p, f, grid.mu.at(i), grid.sigma.at(j)));
    }
  }
  return SweepField(p, f, grid, std::move(entries));
}

namespace {

LevelSetPoint to_point(const SweepEntry& e) {
  LevelSetPoint pt;
  pt.mu = e.mu;
  pt.sigma = e.sigma;
  pt.global = e.global;
  pt.cond = e.cond;
  const auto [lo, hi] = std::minmax_element(e.cond.begin(), e.cond.end());
  pt.delta_egt = *hi - *lo;
  return pt;
}

// Bisects the segment a -> b, whose endpoints lie on opposite sides of epsilon.
LevelSetPoint refine_edge(const SweepField& field, const SweepEntry& a, const SweepEntry& b,
                          double epsilon, double level_tol) {
  double t_lo = 0.0;
  double t_hi = 1.0;
  const bool a_below = a.global < epsilon;
  SweepEntry best = std::abs(a.global - epsilon) <= std::abs(b.global - epsilon) ? a : b;
  for (int it = 0; it < 100 && std::abs(best.global - epsilon) > level_tol; ++it) {
    const double t = 0.5 * (t_lo + t_hi);
    const SweepEntry m = evaluate_rescaled(field.target(), field.generator(),
                                           a.mu + t * (b.mu - a.mu),
                                           a.sigma + t * (b.sigma - a.sigma));
    if (!m.valid) break;
    if (std::abs(m.global - epsilon) < std::abs(best.global - epsilon)) best = m;
    if ((m.global < epsilon) == a_below) {
      t_lo = t;
    } else {
      t_hi = t;
    }
  }
  return to_point(best);
}

}  // namespace

std::vector<LevelSetPoint> extract_level_set(const SweepField& field, double epsilon,
                                             double level_tol) {
  if (!(level_tol > 0.0)) throw ValidationError("extract_level_set: level_tol must be > 0");
  const std::size_t nm = field.grid().mu.n;
  const std::size_t ns = field.grid().sigma.n;
  std::vector<LevelSetPoint> out;
  auto side = [&](const SweepEntry& e) { return e.global < epsilon ? -1 : 1; };
  auto consider = [&](const SweepEntry& a, const SweepEntry& b) {
    if (!a.valid || !b.valid) return;
    if (a.global == epsilon || b.global == epsilon) return;  // handled as lattice nodes
    if (side(a) == side(b)) return;
    LevelSetPoint pt = refine_edge(field, a, b, epsilon, level_tol);
    if (std::abs(pt.global - epsilon) <= level_tol) out.push_back(std::move(pt));
  };
  for (std::size_t i = 0; i < nm; ++i) {
    for (std::size_t j = 0; j < ns; ++j) {
      const SweepEntry& e = field.at(i, j);
      if (e.valid && e.global == epsilon) out.push_back(to_point(e));
      if (i + 1 < nm) consider(e, field.at(i + 1, j));
      if (j + 1 < ns) consider(e, field.at(i, j + 1));
    }
  }
  if (out.empty()) {
    throw ValidationError("extract_level_set: no model reaches the level " + to_string(epsilon));
  }
  std::sort(out.begin(), out.end(), [](const LevelSetPoint& x, const LevelSetPoint& y) {
    return x.mu != y.mu ? x.mu < y.mu : x.sigma < y.sigma;
  });
  return out;
}

ImbalanceExtremes imbalance_extremes(const std::vector<LevelSetPoint>& points) {
  if (points.empty()) throw ValidationError("imbalance_extremes: empty point list");
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t k = 1; k < points.size(); ++k) {
    if (points[k].delta_egt < points[lo].delta_egt) lo = k;
    if (points[k].delta_egt > points[hi].delta_egt) hi = k;
  }
  return {points[lo], points[hi]};
}

}  // namespace egt
