#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "egt/divergence.hpp"
#include "egt/grid.hpp"

namespace egt {

struct CriterionResult {
  bool passed = false;
  double gap = 0.0;  ///< the delta the pair actually achieves
};

struct EgtResult {
  bool passed = false;
  ExtendedReal gap;  ///< +inf when finite and infinite divergences are mixed
  std::vector<ExtendedReal> per_group;
};

/// Rounding allowance on proportion gaps: 0.56 - 0.5 evaluates to
/// 0.06000000000000005, which still passes at delta = 0.06.
inline constexpr double kProportionSlack = 8 * std::numeric_limits<double>::epsilon();

/// max_a |pi_a^Q - pi_a^P| <= delta (+ kProportionSlack).
CriterionResult check_mgo(const GroupedDistribution& p, const GroupedDistribution& q,
                          double delta);
/// max_{a,a'} |pi_a^Q - pi_{a'}^Q| <= delta (+ kProportionSlack).
CriterionResult check_ego(const GroupedDistribution& q, double delta);
/// max_{a,a'} |D_f(P_a || Q_a) - D_f(P_a' || Q_a')| <= delta (closed inequality).
/// All-infinite divergences have gap 0; a finite/infinite mix has gap +inf.
EgtResult check_egt(const FGenerator& f, const GroupedDistribution& p,
                    const GroupedDistribution& q, double delta);

/// Largest pairwise gap of a list of extended reals.
ExtendedReal max_pairwise_gap(const std::vector<ExtendedReal>& values);
double max_pairwise_gap(const std::vector<double>& values);

struct GroupMetrics {
  std::string name;
  double proportion_p = 0.0;
  double proportion_q = 0.0;
  double precision = 0.0;  ///< Q_a(Supp P_a)
  double recall = 0.0;     ///< P_a(Supp Q_a)
  ExtendedReal divergence;
};

struct FairnessReport {
  std::string generator;
  ExtendedReal global_divergence;
  std::vector<GroupMetrics> per_group;
  double delta_mgo = 0.0;
  double delta_ego = 0.0;
  ExtendedReal delta_egt;
  double delta_p = 0.0;
  double delta_r = 0.0;
  double delta_pr = 0.0;  ///< gap of per-group precision + recall
};

/// Full per-group report. support_tol, when set, overrides the support
/// threshold of every conditional before precision/recall are measured.
/// Requires every group of P and Q to carry a conditional.
FairnessReport fairness_report(const FGenerator& f, const GroupedDistribution& p,
                               const GroupedDistribution& q,
                               std::optional<double> support_tol = std::nullopt);

/// A finite model family together with the pools its conditional closure
/// draws from.
class ClosureFamily {
 public:
  /// Pools are deduplicated by exact equality; empty-group conditionals are
  /// skipped. Throws ValidationError on an empty family, mismatched
  /// partitions or an empty pool.
  explicit ClosureFamily(std::vector<GroupedDistribution> candidates);

  const std::vector<GroupedDistribution>& candidates() const { return candidates_; }
  const AttributePartition& partition() const { return candidates_.front().partition(); }
  std::size_t num_groups() const { return pools_.size(); }
  const std::vector<GriddedDensity>& per_group_pool(std::size_t a) const { return pools_[a]; }
  const std::vector<std::vector<double>>& proportion_pool() const { return proportion_pool_; }
  /// Number of closure members: product of pool sizes times proportion pool size.
  double combination_count() const;

 private:
  std::vector<GroupedDistribution> candidates_;
  std::vector<std::vector<GriddedDensity>> pools_;
  std::vector<std::vector<double>> proportion_pool_;
};

inline constexpr double kClosureEnumerationCap = 1e4;

struct ClosureOptimum {
  GroupedDistribution q_star;
  ExtendedReal value;
  std::vector<ExtendedReal> per_group_min;
  std::vector<std::size_t> argmin;  ///< pool index per group
  bool enumeration_verified = false;
};

/// Minimizer of D_f(P || .) over the conditional closure of an MGO family.
/// The minimum factorizes per group; when the closure has at most
/// kClosureEnumerationCap members the value is cross-checked against
/// closure_enumeration_minimum and a mismatch above 1e-12 throws
/// PropertyViolation.
ClosureOptimum closure_optimum(const FGenerator& f, const GroupedDistribution& p,
                               const ClosureFamily& family, double mgo_tol = 1e-12);

/// Brute force: min over every recombination of pool entries and pool
/// proportions of D_f(P || Q). Throws ValidationError beyond the cap.
ExtendedReal closure_enumeration_minimum(const FGenerator& f, const GroupedDistribution& p,
                                         const ClosureFamily& family);

struct BoundRow {
  std::size_t candidate = 0;
  ExtendedReal egt_gap;
  bool egt_member = false;
  ExtendedReal divergence;
  double margin = 0.0;  ///< D_f(P || Q) - (bound - delta); only checked for members
  bool violated = false;
};

struct LowerBoundReport {
  double delta = 0.0;
  ExtendedReal bound;  ///< max_a D_f(P_a || Q*_a)
  std::vector<BoundRow> rows;
  std::size_t checked = 0;
  std::size_t violations = 0;
};

/// Checks D_f(P || Q) >= max_a D_f(P_a || Q*_a) - delta for every delta-EGT
/// member Q of the family. A row is violated when its margin is below -slack.
LowerBoundReport verify_lower_bound(const FGenerator& f, const GroupedDistribution& p,
                                    const ClosureFamily& family, double delta,
                                    double slack = 1e-12);

}  // namespace egt
