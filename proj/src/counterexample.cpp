#include "egt/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "egt/error.hpp"

namespace egt {

namespace {

// D_f(Ber(a) || Ber(w)) with the complements passed explicitly so that
// cumulative masses need not sum to exactly 1.
double bernoulli_divergence(const FGenerator& f, double a, double a_bar, double w) {
  return f.perspective(a, w) + f.perspective(a_bar, 1.0 - w);
}

// Limit of bernoulli_divergence as w -> 0 (toward_zero) or w -> 1.
ExtendedReal bernoulli_limit(const FGenerator& f, double a, double a_bar, bool toward_zero) {
  if (toward_zero) return a * f.slope_at_infinity() + ExtendedReal(f.perspective(a_bar, 1.0));
  return ExtendedReal(f.perspective(a, 1.0)) + a_bar * f.slope_at_infinity();
}

// Solves bernoulli_divergence(w) = target on one monotone branch:
// w in (0, a) when lower, w in (a, 1) otherwise.
double solve_branch(const FGenerator& f, double a, double a_bar, double target, bool lower) {
  double lo = lower ? 0.0 : a;
  double hi = lower ? a : 1.0;
  // g is decreasing on the lower branch and increasing on the upper one.
  auto above = [&](double w) { return bernoulli_divergence(f, a, a_bar, w) > target; };
  for (int it = 0; it < 4000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (above(mid) == lower) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  auto err = [&](double w) {
    if (w <= 0.0 || w >= 1.0) return std::numeric_limits<double>::infinity();
    return std::abs(bernoulli_divergence(f, a, a_bar, w) - target);
  };
  return err(lo) <= err(hi) ? lo : hi;
}

void check_open_domain(double alpha, double beta) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("phi: alpha must lie in (0, 1)");
  if (!(beta > 1.0) || !std::isfinite(beta)) {
    throw ValidationError("phi: beta must lie in (1, inf)");
  }
}

}  // namespace

double phi(const FGenerator& f, double alpha, double beta) {
  check_open_domain(alpha, beta);
  const double w = 1.0 / beta;
  const double v = f.perspective(alpha, w) + f.perspective(1.0 - alpha, (beta - 1.0) / beta);
  if (std::isnan(v)) throw NumericalError("phi: NaN");
  return v;
}

QAlphaBeta build_q_alpha_beta(const FGenerator& f, const GriddedDensity& r, double alpha,
                              double beta, RegionRule rule) {
  check_open_domain(alpha, beta);
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] > 0.0) cells.push_back(i);
  }
  if (cells.size() < 2) throw ValidationError("build_q_alpha_beta: R has fewer than two cells");
  const std::size_t m = cells.size();
  // prefix[j] = mass of the first j cells, suffix[j] = mass of cells j..m-1.
  std::vector<double> prefix(m + 1, 0.0), suffix(m + 1, 0.0);
  for (std::size_t j = 0; j < m; ++j) prefix[j + 1] = prefix[j] + r[cells[j]];
  for (std::size_t j = m; j-- > 0;) suffix[j] = suffix[j + 1] + r[cells[j]];

  std::vector<double> q(r.size(), 0.0);
  const double w0 = 1.0 / beta;

  if (rule == RegionRule::lower_tail_split) {
    std::size_t j = 0;
    while (j + 1 < m && prefix[j + 1] < alpha) ++j;
    const double theta = std::clamp((alpha - prefix[j]) / r[cells[j]], 0.0, 1.0);
    const double in = w0 / alpha;
    const double out = (1.0 - w0) / (1.0 - alpha);
    for (std::size_t t = 0; t < m; ++t) {
      const std::size_t i = cells[t];
      if (t < j) {
        q[i] = r[i] * in;
      } else if (t > j) {
        q[i] = r[i] * out;
      } else {
        q[i] = r[i] * (theta * in + (1.0 - theta) * out);
      }
    }
    return {GriddedDensity(r.grid(), std::move(q), r.support_tol()),
            PhiPoint{alpha, beta, phi(f, alpha, beta)}};
  }

  const double target = phi(f, alpha, beta);
  std::vector<std::size_t> order(m - 1);
  std::iota(order.begin(), order.end(), std::size_t{1});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(prefix[x] - alpha) < std::abs(prefix[y] - alpha);
  });
  const bool prefer_lower = w0 < alpha;
  for (std::size_t split : order) {
    const double a = prefix[split];
    const double a_bar = suffix[split];
    std::optional<double> w;
    if (target == 0.0) {
      w = a;
    } else {
      for (bool lower : {prefer_lower, !prefer_lower}) {
        if (bernoulli_limit(f, a, a_bar, lower) > ExtendedReal(target)) {
          w = solve_branch(f, a, a_bar, target, lower);
          break;
        }
      }
    }
    if (!w) continue;
    const double in = *w / a;
    const double out = (1.0 - *w) / a_bar;
    for (std::size_t t = 0; t < m; ++t) {
      const std::size_t i = cells[t];
      q[i] = r[i] * (t < split ? in : out);
    }
    return {GriddedDensity(r.grid(), std::move(q), r.support_tol()),
            PhiPoint{a, 1.0 / *w, bernoulli_divergence(f, a, a_bar, *w)}};
  }
  throw ValidationError("build_q_alpha_beta: alpha not reachable on this grid");
}

PhiPoint invert_phi(const FGenerator& f, double target) {
  if (!(target > 0.0) || !std::isfinite(target)) {
    throw ValidationError("invert_phi: target must be finite and > 0");
  }
  if (!(ExtendedReal(target) < f.range_bound())) {
    throw ValidationError("invert_phi: target " + to_string(target) +
                          " is outside the divergence range (0, " + to_string(f.range_bound()) +
                          ")");
  }
  double alpha_max = 0.0;
  double big = 0.0;
  bool reached = false;
  for (int k = 1; k <= 15 && !reached; ++k) {
    alpha_max = 1.0 - std::pow(10.0, -k);
    big = std::pow(10.0, k);
    reached = phi(f, alpha_max, 2.0 + big) > target;
  }
  if (!reached) throw NumericalError("invert_phi: target not reached along the search path");

  auto point = [&](double s) {
    PhiPoint p{0.5 + s * (alpha_max - 0.5), 2.0 + s * big, 0.0};
    p.value = phi(f, p.alpha, p.beta);
    return p;
  };
  constexpr int kSamples = 1000;
  double lo = 0.0;
  double hi = 1.0;
  for (int j = 1; j <= kSamples; ++j) {
    const double s = static_cast<double>(j) / kSamples;
    if (point(s).value >= target) {
      hi = s;
      break;
    }
    lo = s;
  }
  PhiPoint best = point(hi);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const PhiPoint p = point(mid);
    if (std::abs(p.value - target) < std::abs(best.value - target)) best = p;
    if (std::abs(p.value - target) <= 1e-13) break;
    if (p.value < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (!(std::abs(best.value - target) <= 1e-9)) {
    throw NumericalError("invert_phi: bisection did not reach 1e-9 (phi not monotone on the "
                         "bracket)");
  }
  return best;
}

std::vector<double> counterexample_targets(const CounterexampleSpec& spec, std::size_t k) {
  const double kd = static_cast<double>(k);
  std::vector<double> t(k, spec.epsilon - spec.gamma / kd);
  t.at(spec.bar_a) = spec.epsilon + spec.gamma * (kd - 1.0) / kd;
  return t;
}

Counterexample build_counterexample(const FGenerator& f, const GroupedDistribution& p,
                                    const CounterexampleSpec& spec) {
  const std::size_t k = p.num_groups();
  if (spec.bar_a >= k) throw ValidationError("counterexample: bar_a out of range");
  if (!(spec.gamma > 0.0 && spec.gamma < spec.epsilon)) {
    throw ValidationError("counterexample: require 0 < gamma < epsilon");
  }
  if (!(ExtendedReal(spec.epsilon) < f.range_bound())) {
    throw ValidationError("counterexample: epsilon outside the divergence range");
  }
  for (std::size_t a = 0; a < k; ++a) {
    if (std::abs(p.proportion(a) - 1.0 / static_cast<double>(k)) > 1e-12) {
      throw ValidationError("counterexample: P must have equal group proportions");
    }
  }
  const std::vector<double> targets = counterexample_targets(spec, k);
  for (double t : targets) {
    if (!(t > 0.0) || !(ExtendedReal(t) < f.range_bound())) {
      throw ValidationError("counterexample: group target " + to_string(t) +
                            " outside the divergence range");
    }
  }
  std::vector<std::optional<GriddedDensity>> conds;
  std::vector<PhiPoint> points;
  for (std::size_t a = 0; a < k; ++a) {
    const PhiPoint start = invert_phi(f, targets[a]);
    QAlphaBeta built = build_q_alpha_beta(f, p.conditional(a), start.alpha, start.beta);
    points.push_back(built.effective);
    conds.emplace_back(std::move(built.q));
  }
  GroupedDistribution q(p.partition(), {p.proportions().begin(), p.proportions().end()},
                        std::move(conds));
  Counterexample out{q,
                     targets,
                     std::move(points),
                     f_divergence(f, recombine(p), recombine(q)),
                     check_egt(f, p, q, 0.0),
                     check_mgo(p, q, 0.0),
                     check_ego(q, 0.0)};
  if (out.global_divergence.is_infinite() ||
      std::abs(out.global_divergence.value() - spec.epsilon) > 1e-7) {
    throw PropertyViolation("counterexample: global divergence " +
                            to_string(out.global_divergence) + " misses epsilon");
  }
  for (std::size_t a = 0; a < k; ++a) {
    const ExtendedReal d = out.egt.per_group[a];
    if (d.is_infinite() || std::abs(d.value() - targets[a]) > 1e-7) {
      throw PropertyViolation("counterexample: group " + std::to_string(a) +
                              " divergence misses its target");
    }
  }
  return out;
}

}  // namespace egt
