#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "egt/grid.hpp"

namespace egt {

/// A nonnegative real or +infinity. Infinity is a flag, never an overflowed
/// double.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  constexpr ExtendedReal(double v) : value_(v) {}  // NOLINT: implicit from finite values
  static constexpr ExtendedReal infinity() {
    ExtendedReal r;
    r.infinite_ = true;
    return r;
  }

  constexpr bool is_finite() const { return !infinite_; }
  constexpr bool is_infinite() const { return infinite_; }
  /// Finite value; throws NumericalError when infinite.
  double value() const;
  /// Finite value or +inf as a double, for printing and comparisons.
  double as_double() const;

  friend ExtendedReal operator+(ExtendedReal a, ExtendedReal b);
  /// Scalar times extended real with 0 * inf = 0.
  friend ExtendedReal operator*(double s, ExtendedReal x);
  friend bool operator==(ExtendedReal a, ExtendedReal b);
  friend bool operator<(ExtendedReal a, ExtendedReal b);
  friend bool operator<=(ExtendedReal a, ExtendedReal b) { return !(b < a); }
  friend bool operator>(ExtendedReal a, ExtendedReal b) { return b < a; }
  friend bool operator>=(ExtendedReal a, ExtendedReal b) { return !(a < b); }

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

std::string to_string(ExtendedReal x);

enum class GeneratorKind { kl, reverse_kl, js, tv, chi2, precision, recall, precision_recall };

/// Convex generator f with f(1) = 0 and its boundary limits f(0) and
/// f_bar(inf) = lim f(t)/t.
///
/// The support generators (precision, recall, precision-recall) are the
/// pointwise limits of max(0, 1 - k t) and max(0, t - k) as k grows: f is 0
/// on (0, inf) and only the boundary limits carry mass. Their divergences are
/// 1 - Precision, 1 - Recall and 2 - (Precision + Recall).
class FGenerator {
 public:
  explicit FGenerator(GeneratorKind kind, double log_base = 0.0);

  GeneratorKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double log_base() const { return log_base_; }

  /// f(t) for t > 0.
  double operator()(double t) const;
  /// f'(t) for t > 0 (a subgradient where f is not differentiable).
  double derivative(double t) const;
  /// q f(p/q) for p > 0, q > 0, evaluated without forming p/q.
  double perspective(double p, double q) const;
  /// d/dq of q f(p/q) for q > 0; p = 0 gives f(0).
  double perspective_dq(double p, double q) const;

  ExtendedReal at_zero() const { return at_zero_; }
  ExtendedReal slope_at_infinity() const { return slope_inf_; }
  /// f(0) + f_bar(inf), the supremum of the divergence range.
  ExtendedReal range_bound() const { return at_zero_ + slope_inf_; }

  bool strictly_convex() const;
  bool support_based() const;

 private:
  GeneratorKind kind_;
  std::string name_;
  double log_base_;
  double log_scale_;  // 1 / ln(base)
  ExtendedReal at_zero_;
  ExtendedReal slope_inf_;
};

/// Recognized names: KL, reverse-KL, JS, TV, chi2, precision, recall,
/// precision-recall (case-insensitive). log_base <= 0 selects the default:
/// e for KL and reverse-KL, 2 for JS.
FGenerator builtin_generator(std::string_view name, double log_base = 0.0);
std::vector<FGenerator> all_builtin_generators();

/// D_f(P || Q) including the mass P puts outside Supp(Q).
ExtendedReal f_divergence(const FGenerator& f, const GriddedDensity& p, const GriddedDensity& q);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision(Q || P) = Q(Supp P), Recall(Q || P) = P(Supp Q).
PrecisionRecall support_precision_recall(const GriddedDensity& q, const GriddedDensity& p);

struct DecompositionCheck {
  ExtendedReal lhs;  ///< D_f(P || Q) on the recombined mixtures
  ExtendedReal rhs;  ///< sum_a pi_a^Q D_f(P_a || Q_a)
  double residual = 0.0;  ///< |lhs - rhs|, or 0 when both are infinite
};

/// Checks the mixture decomposition of D_f under matching proportions.
/// Refuses (ValidationError) when |pi^P - pi^Q| exceeds mgo_tol for some
/// group or P is trivial.
DecompositionCheck decomposition_check(const FGenerator& f, const GroupedDistribution& p,
                                       const GroupedDistribution& q, double mgo_tol = 1e-12);

}  // namespace egt
