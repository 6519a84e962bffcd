#include "egt/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "egt/error.hpp"

namespace egt {

namespace {

void require_same_partition(const GroupedDistribution& p, const GroupedDistribution& q,
                            const char* what) {
  if (!(p.partition() == q.partition())) {
    throw ValidationError(std::string(what) + ": partition mismatch");
  }
}

void require_conditionals(const GroupedDistribution& d, const char* what, const char* which) {
  for (std::size_t a = 0; a < d.num_groups(); ++a) {
    if (!d.has_conditional(a)) {
      throw ValidationError(std::string(what) + ": group " + std::to_string(a) + " of " + which +
                            " is empty");
    }
  }
}

std::vector<ExtendedReal> group_divergences(const FGenerator& f, const GroupedDistribution& p,
                                            const GroupedDistribution& q) {
  std::vector<ExtendedReal> out;
  out.reserve(p.num_groups());
  for (std::size_t a = 0; a < p.num_groups(); ++a) {
    out.push_back(f_divergence(f, p.conditional(a), q.conditional(a)));
  }
  return out;
}

bool same_density(const GriddedDensity& a, const GriddedDensity& b) {
  return a.support_tol() == b.support_tol() &&
         std::equal(a.mass().begin(), a.mass().end(), b.mass().begin(), b.mass().end());
}

}  // namespace

ExtendedReal max_pairwise_gap(const std::vector<ExtendedReal>& values) {
  if (values.empty()) return 0.0;
  const auto n_inf = std::count_if(values.begin(), values.end(),
                                   [](ExtendedReal v) { return v.is_infinite(); });
  if (n_inf == static_cast<std::ptrdiff_t>(values.size())) return 0.0;
  if (n_inf > 0) return ExtendedReal::infinity();
  double lo = values.front().value();
  double hi = lo;
  for (ExtendedReal v : values) {
    lo = std::min(lo, v.value());
    hi = std::max(hi, v.value());
  }
  return hi - lo;
}

double max_pairwise_gap(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

CriterionResult check_mgo(const GroupedDistribution& p, const GroupedDistribution& q,
                          double delta) {
  require_same_partition(p, q, "check_mgo");
  if (!(delta >= 0.0)) throw ValidationError("check_mgo: delta must be >= 0");
  CriterionResult r;
  for (std::size_t a = 0; a < p.num_groups(); ++a) {
    r.gap = std::max(r.gap, std::abs(q.proportion(a) - p.proportion(a)));
  }
  r.passed = r.gap <= delta + kProportionSlack;
  return r;
}

CriterionResult check_ego(const GroupedDistribution& q, double delta) {
  if (!(delta >= 0.0)) throw ValidationError("check_ego: delta must be >= 0");
  CriterionResult r;
  r.gap = max_pairwise_gap(std::vector<double>(q.proportions().begin(), q.proportions().end()));
  r.passed = r.gap <= delta + kProportionSlack;
  return r;
}

EgtResult check_egt(const FGenerator& f, const GroupedDistribution& p,
                    const GroupedDistribution& q, double delta) {
  require_same_partition(p, q, "check_egt");
  if (!(delta >= 0.0)) throw ValidationError("check_egt: delta must be >= 0");
  require_conditionals(p, "check_egt", "P");
  require_conditionals(q, "check_egt", "Q");
  EgtResult r;
  r.per_group = group_divergences(f, p, q);
  r.gap = max_pairwise_gap(r.per_group);
  r.passed = r.gap <= ExtendedReal(delta);
  return r;
}

FairnessReport fairness_report(const FGenerator& f, const GroupedDistribution& p,
                               const GroupedDistribution& q, std::optional<double> support_tol) {
  require_same_partition(p, q, "fairness_report");
  require_conditionals(p, "fairness_report", "P");
  require_conditionals(q, "fairness_report", "Q");
  FairnessReport rep;
  rep.generator = f.name();
  rep.global_divergence = f_divergence(f, recombine(p), recombine(q));
  std::vector<ExtendedReal> divs;
  std::vector<double> precisions, recalls, sums;
  for (std::size_t a = 0; a < p.num_groups(); ++a) {
    GriddedDensity pa = p.conditional(a);
    GriddedDensity qa = q.conditional(a);
    if (support_tol) {
      pa = pa.with_support_tol(*support_tol);
      qa = qa.with_support_tol(*support_tol);
    }
    const PrecisionRecall pr = support_precision_recall(qa, pa);
    GroupMetrics g;
    g.name = p.partition().names()[a];
    g.proportion_p = p.proportion(a);
    g.proportion_q = q.proportion(a);
    g.precision = pr.precision;
    g.recall = pr.recall;
    g.divergence = f_divergence(f, p.conditional(a), q.conditional(a));
    divs.push_back(g.divergence);
    precisions.push_back(g.precision);
    recalls.push_back(g.recall);
    sums.push_back(g.precision + g.recall);
    rep.per_group.push_back(std::move(g));
  }
  rep.delta_mgo = check_mgo(p, q, 0.0).gap;
  rep.delta_ego = check_ego(q, 0.0).gap;
  rep.delta_egt = max_pairwise_gap(divs);
  rep.delta_p = max_pairwise_gap(precisions);
  rep.delta_r = max_pairwise_gap(recalls);
  rep.delta_pr = max_pairwise_gap(sums);
  return rep;
}

ClosureFamily::ClosureFamily(std::vector<GroupedDistribution> candidates)
    : candidates_(std::move(candidates)) {
  if (candidates_.empty()) throw ValidationError("closure family: no candidates");
  const AttributePartition& part = candidates_.front().partition();
  pools_.resize(part.num_groups());
  for (const GroupedDistribution& c : candidates_) {
    if (!(c.partition() == part)) throw ValidationError("closure family: partition mismatch");
    for (std::size_t a = 0; a < c.num_groups(); ++a) {
      if (!c.has_conditional(a)) continue;
      const GriddedDensity& d = c.conditional(a);
      const bool seen = std::any_of(pools_[a].begin(), pools_[a].end(),
                                    [&](const GriddedDensity& e) { return same_density(d, e); });
      if (!seen) pools_[a].push_back(d);
    }
    std::vector<double> props(c.proportions().begin(), c.proportions().end());
    if (std::find(proportion_pool_.begin(), proportion_pool_.end(), props) ==
        proportion_pool_.end()) {
      proportion_pool_.push_back(std::move(props));
    }
  }
  for (std::size_t a = 0; a < pools_.size(); ++a) {
    if (pools_[a].empty()) {
      throw ValidationError("closure family: empty pool for group " + std::to_string(a));
    }
  }
}

double ClosureFamily::combination_count() const {
  double n = static_cast<double>(proportion_pool_.size());
  for (const auto& pool : pools_) n *= static_cast<double>(pool.size());
  return n;
}

ClosureOptimum closure_optimum(const FGenerator& f, const GroupedDistribution& p,
                               const ClosureFamily& family, double mgo_tol) {
  if (!(p.partition() == family.partition())) {
    throw ValidationError("closure_optimum: partition mismatch");
  }
  if (!p.is_nontrivial()) throw ValidationError("closure_optimum: P is trivial");
  for (const GroupedDistribution& c : family.candidates()) {
    if (!check_mgo(p, c, mgo_tol).passed) {
      throw ValidationError("closure_optimum: family member violates matching proportions");
    }
  }
  const std::size_t k = family.num_groups();
  std::vector<ExtendedReal> mins(k);
  std::vector<std::size_t> argmin(k, 0);
  std::vector<std::optional<GriddedDensity>> conds(k);
  ExtendedReal value = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    const auto& pool = family.per_group_pool(a);
    mins[a] = f_divergence(f, p.conditional(a), pool[0]);
    for (std::size_t j = 1; j < pool.size(); ++j) {
      const ExtendedReal d = f_divergence(f, p.conditional(a), pool[j]);
      if (d < mins[a]) {
        mins[a] = d;
        argmin[a] = j;
      }
    }
    conds[a] = pool[argmin[a]];
    value = value + p.proportion(a) * mins[a];
  }
  ClosureOptimum out{
      GroupedDistribution(p.partition(), {p.proportions().begin(), p.proportions().end()},
                          std::move(conds)),
      value, std::move(mins), std::move(argmin), false};
  if (family.combination_count() <= kClosureEnumerationCap) {
    const ExtendedReal brute = closure_enumeration_minimum(f, p, family);
    const bool match = brute.is_infinite() || value.is_infinite()
                           ? brute.is_infinite() == value.is_infinite()
                           : std::abs(brute.value() - value.value()) <= 1e-12;
    if (!match) {
      throw PropertyViolation("closure_optimum: factorized minimum " + to_string(value) +
                              " disagrees with enumeration " + to_string(brute));
    }
    out.enumeration_verified = true;
  }
  return out;
}

ExtendedReal closure_enumeration_minimum(const FGenerator& f, const GroupedDistribution& p,
                                         const ClosureFamily& family) {
  if (family.combination_count() > kClosureEnumerationCap) {
    throw ValidationError("closure enumeration: more than 10^4 combinations");
  }
  const AttributePartition& part = family.partition();
  const GriddedDensity target = recombine(p);
  const std::size_t k = family.num_groups();
  std::vector<std::size_t> idx(k, 0);
  ExtendedReal best = ExtendedReal::infinity();
  bool first = true;
  for (const std::vector<double>& props : family.proportion_pool()) {
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      std::vector<double> m(part.grid().n_cells, 0.0);
      for (std::size_t a = 0; a < k; ++a) {
        const GriddedDensity& c = family.per_group_pool(a)[idx[a]];
        for (std::size_t i : part.cells_of(a)) m[i] = props[a] * c[i];
      }
      const ExtendedReal d = f_divergence(f, target, GriddedDensity(part.grid(), std::move(m)));
      if (first || d < best) best = d;
      first = false;
      std::size_t a = 0;
      while (a < k && ++idx[a] == family.per_group_pool(a).size()) idx[a++] = 0;
      if (a == k) break;
    }
  }
  return best;
}

LowerBoundReport verify_lower_bound(const FGenerator& f, const GroupedDistribution& p,
                                    const ClosureFamily& family, double delta, double slack) {
  if (!(delta > 0.0)) throw ValidationError("verify_lower_bound: delta must be > 0");
  const ClosureOptimum opt = closure_optimum(f, p, family);
  LowerBoundReport rep;
  rep.delta = delta;
  ExtendedReal bound = 0.0;
  for (ExtendedReal m : opt.per_group_min) bound = std::max(bound, m);
  rep.bound = bound;
  const GriddedDensity target = recombine(p);
  const auto& cands = family.candidates();
  for (std::size_t c = 0; c < cands.size(); ++c) {
    BoundRow row;
    row.candidate = c;
    const EgtResult egt = check_egt(f, p, cands[c], delta);
    row.egt_gap = egt.gap;
    row.egt_member = egt.passed;
    row.divergence = f_divergence(f, target, recombine(cands[c]));
    if (row.divergence.is_infinite()) {
      row.margin = std::numeric_limits<double>::infinity();
    } else if (bound.is_infinite()) {
      row.margin = -std::numeric_limits<double>::infinity();
    } else {
      row.margin = row.divergence.value() - (bound.value() - delta);
    }
    if (row.egt_member) {
      ++rep.checked;
      row.violated = row.margin < -slack;
      if (row.violated) ++rep.violations;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace egt
