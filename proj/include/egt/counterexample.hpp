#pragma once

#include <cstddef>
#include <vector>

#include "egt/divergence.hpp"
#include "egt/fairness.hpp"
#include "egt/grid.hpp"

namespace egt {

struct PhiPoint {
  double alpha = 0.5;
  double beta = 2.0;
  double value = 0.0;
};

/// phi(alpha, beta) = (1/beta) f(beta alpha) + ((beta-1)/beta) f((1-alpha) beta/(beta-1)),
/// i.e. D_f(Ber(alpha) || Ber(1/beta)). Requires alpha in (0,1), beta in (1,inf).
double phi(const FGenerator& f, double alpha, double beta);

/// How the two-region set A with R(A) = alpha is chosen.
enum class RegionRule {
  /// A is a lower tail of whole support cells. alpha is moved to the nearest
  /// attainable cumulative mass and beta is re-solved so phi is unchanged;
  /// D_f(R || Q) then equals phi up to rounding.
  lower_tail_snap,
  /// A is the lower tail with the boundary cell's mass split fractionally.
  /// Keeps alpha and beta as given; D_f(R || Q) <= phi, with equality only
  /// when no cell is split.
  lower_tail_split,
};

struct QAlphaBeta {
  GriddedDensity q;
  PhiPoint effective;  ///< the (alpha, beta) actually realized on the grid
};

/// q = (1/beta)(r/alpha) on A and (1 - 1/beta)(r/(1-alpha)) off A.
/// Supp(q) = Supp(r). Throws ValidationError when R has fewer than two
/// support cells or, in snap mode, when no cumulative mass reaches phi.
QAlphaBeta build_q_alpha_beta(const FGenerator& f, const GriddedDensity& r, double alpha,
                              double beta, RegionRule rule = RegionRule::lower_tail_snap);

/// First root of phi = target along alpha(s) = 1/2 + s(alpha_max - 1/2),
/// beta(s) = 2 + s B. Deterministic; |phi - target| <= 1e-9 or NumericalError.
PhiPoint invert_phi(const FGenerator& f, double target);

struct CounterexampleSpec {
  double epsilon = 1.0;
  double gamma = 0.5;
  std::size_t bar_a = 0;
};

/// Per-group divergence targets: epsilon + gamma (K-1)/K for bar_a, epsilon - gamma/K otherwise.
std::vector<double> counterexample_targets(const CounterexampleSpec& spec, std::size_t k);

struct Counterexample {
  GroupedDistribution q;
  std::vector<double> targets;
  std::vector<PhiPoint> points;
  ExtendedReal global_divergence;
  EgtResult egt;
  CriterionResult mgo;
  CriterionResult ego;
};

/// Builds Q with exactly P's proportions whose group divergences hit the
/// targets, so Q matches P's proportions while EGT fails by gamma.
/// Requires P to have equal proportions within 1e-12. Throws PropertyViolation
/// if the built Q misses the global target by more than 1e-7.
Counterexample build_counterexample(const FGenerator& f, const GroupedDistribution& p,
                                    const CounterexampleSpec& spec);

}  // namespace egt
